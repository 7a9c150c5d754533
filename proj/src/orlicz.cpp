#include "stabposi/orlicz.hpp"

#include "stabposi/errors.hpp"

#include <cmath>
#include <limits>

namespace stabposi {

namespace {

// log(1 + e^v) without overflow.
double log1p_exp(double v) { return v > 30.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); }

}  // namespace

OrliczFunction::OrliczFunction(std::string name, Fn psi, std::optional<Fn> inverse_from_log)
    : name_(std::move(name)), psi_(std::move(psi)), inverse_from_log_(std::move(inverse_from_log)) {
  require(!name_.empty(), "Orlicz function needs a name");
  require(static_cast<bool>(psi_), "Orlicz function needs psi");
}

double OrliczFunction::inverse(double u) const {
  require(u > 0.0, "psi^{-1} needs u > 0");
  return inverse_from_log(std::log(u));
}

double OrliczFunction::inverse_from_log(double log_u) const {
  require(!std::isnan(log_u), "psi^{-1} argument is NaN");
  if (inverse_from_log_) return (*inverse_from_log_)(log_u);
  const double u = std::exp(log_u);
  require(std::isfinite(u), "psi^{-1} argument overflows and psi has no closed-form inverse");
  double lo = 0.0;
  double hi = 1.0;
  while (psi_(hi) < u) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) throw NonConvergence("could not bracket psi^{-1}(" + std::to_string(u) + ")");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (psi_(mid) < u ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

OrliczFunction subgaussian_orlicz() {
  return OrliczFunction(
      "subgaussian", [](double x) { return std::expm1(x * x); },
      [](double log_u) { return std::sqrt(log1p_exp(log_u)); });
}

OrliczFunction subexponential_orlicz() {
  return OrliczFunction(
      "subexponential", [](double x) { return std::expm1(x); },
      [](double log_u) { return log1p_exp(log_u); });
}

OrliczRegistry::OrliczRegistry(std::vector<OrliczFunction> functions)
    : functions_(std::move(functions)) {
  for (std::size_t i = 0; i < functions_.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      require(functions_[i].name() != functions_[j].name(),
              "duplicate Orlicz function name: " + functions_[i].name());
    }
  }
}

const OrliczRegistry& OrliczRegistry::builtin() {
  static const OrliczRegistry registry({subgaussian_orlicz(), subexponential_orlicz()});
  return registry;
}

const OrliczFunction& OrliczRegistry::get(const std::string& name) const {
  for (const auto& f : functions_) {
    if (f.name() == name) return f;
  }
  throw UnregisteredOrlicz("no Orlicz function registered under '" + name + "'");
}

bool OrliczRegistry::contains(const std::string& name) const {
  for (const auto& f : functions_) {
    if (f.name() == name) return true;
  }
  return false;
}

std::vector<std::string> OrliczRegistry::names() const {
  std::vector<std::string> out;
  out.reserve(functions_.size());
  for (const auto& f : functions_) out.push_back(f.name());
  return out;
}

}  // namespace stabposi
