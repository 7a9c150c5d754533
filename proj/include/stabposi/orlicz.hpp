#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace stabposi {

/// Convex, nondecreasing psi with psi(0) = 0 and psi(x) -> inf, together with
/// its inverse on [0, inf).
///
/// The inverse is evaluated from log(u) so that arguments such as
/// |M| e^eta / (delta (1 - nu)) never overflow. When no closed form is given,
/// the inverse is found by bracketing and bisection on psi.
class OrliczFunction {
 public:
  using Fn = std::function<double(double)>;

  OrliczFunction(std::string name, Fn psi, std::optional<Fn> inverse_from_log = std::nullopt);

  const std::string& name() const { return name_; }
  double operator()(double x) const { return psi_(x); }
  bool has_closed_form_inverse() const { return inverse_from_log_.has_value(); }

  /// psi^{-1}(u) for u > 0.
  double inverse(double u) const;
  /// psi^{-1}(exp(log_u)).
  double inverse_from_log(double log_u) const;

 private:
  std::string name_;
  Fn psi_;
  std::optional<Fn> inverse_from_log_;
};

/// psi(x) = exp(x^2) - 1.
OrliczFunction subgaussian_orlicz();
/// psi(x) = exp(x) - 1.
OrliczFunction subexponential_orlicz();

/// Immutable name -> OrliczFunction lookup.
class OrliczRegistry {
 public:
  explicit OrliczRegistry(std::vector<OrliczFunction> functions);

  /// Registry holding "subgaussian" and "subexponential".
  static const OrliczRegistry& builtin();

  /// Throws UnregisteredOrlicz for unknown names.
  const OrliczFunction& get(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::vector<std::string> names() const;

 private:
  std::vector<OrliczFunction> functions_;
};

}  // namespace stabposi
