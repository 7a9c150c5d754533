#pragma once

// Least-squares algebra on submodels of a fixed design: OLS fits, projection
// targets, residual projectors and standard errors.

#include <Eigen/Dense>

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace stabposi {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Relative singular-value tolerance for the full-column-rank check.
inline constexpr double kRankTol = 1e-10;

/// Fixed n x d design with cached column norms.
class DesignMatrix {
 public:
  explicit DesignMatrix(Matrix entries);

  Eigen::Index n() const { return entries_.rows(); }
  Eigen::Index d() const { return entries_.cols(); }

  const Matrix& entries() const { return entries_; }
  auto col(Eigen::Index j) const { return entries_.col(j); }
  const Vector& col_norms() const { return col_norms_; }

  /// max_j ||X_j||_2
  double l2inf_norm() const { return l2inf_norm_; }
  /// max_{i,j} |X_ij|
  double linf_norm() const { return linf_norm_; }

  /// Sub-design made of the given rows, in the given order.
  DesignMatrix select_rows(const std::vector<Eigen::Index>& rows) const;

 private:
  Matrix entries_;
  Vector col_norms_;
  double l2inf_norm_ = 0.0;
  double linf_norm_ = 0.0;
};

/// Strictly increasing set of feature indices.
class ModelSet {
 public:
  ModelSet() = default;
  ModelSet(std::initializer_list<std::size_t> indices);
  /// Sorts the input; duplicates are rejected.
  explicit ModelSet(std::vector<std::size_t> indices);

  const std::vector<std::size_t>& indices() const { return indices_; }
  std::size_t size() const { return indices_.size(); }
  bool empty() const { return indices_.empty(); }
  bool contains(std::size_t j) const;
  std::size_t operator[](std::size_t pos) const { return indices_[pos]; }

  /// Position of feature j inside the set; throws if absent.
  std::size_t position(std::size_t j) const;
  ModelSet with(std::size_t j) const;
  ModelSet without(std::size_t j) const;

  /// Throws InvalidArgument when some index is >= d.
  void check_within(Eigen::Index d) const;

  auto begin() const { return indices_.begin(); }
  auto end() const { return indices_.end(); }

  friend bool operator==(const ModelSet&, const ModelSet&) = default;

 private:
  std::vector<std::size_t> indices_;
};

/// OLS coefficients and their standard errors on a model.
struct FitResult {
  ModelSet model;
  Vector coefficients;
  Vector stderrs;
};

/// Thin QR of X_M with the full-column-rank check applied.
///
/// All submodel operations below go through this factorization, so
/// ols_fit(X, M, mu) and target_coefficients(X, M, mu) share a code path.
class SubmodelQR {
 public:
  SubmodelQR(const DesignMatrix& x, const ModelSet& model);

  std::size_t size() const { return size_; }
  Eigen::Index n() const { return q_.rows(); }

  /// argmin_b ||v - X_M b||_2.
  Vector solve(const Vector& v) const;
  /// sqrt(((X_M^T X_M)^{-1})_jj) for every position j in M.
  Vector gram_inverse_diag_sqrt() const;
  /// Orthonormal basis of span(X_M), n x |M|.
  const Matrix& q() const { return q_; }
  /// v - P_M v.
  Vector residual(const Vector& v) const;

 private:
  std::size_t size_ = 0;
  Matrix q_;
  Matrix r_;
};

Vector ols_fit(const DesignMatrix& x, const ModelSet& model, const Vector& y);

/// beta_M = X_M^+ mu.
Vector target_coefficients(const DesignMatrix& x, const ModelSet& model, const Vector& mu);

/// I - P_M as a dense n x n matrix. The empty model gives the identity.
Matrix residual_projector(const DesignMatrix& x, const ModelSet& model);

/// sigma * sqrt(((X_M^T X_M)^{-1})_jj).
Vector stderr_known_sigma(const DesignMatrix& x, const ModelSet& model, double sigma);

struct SigmaEstimate {
  double sigma_hat = 0.0;
  int dof = 0;
};

/// sqrt(RSS / (n - d)) from the full-model OLS fit.
SigmaEstimate sigma_hat_full_model(const DesignMatrix& x, const Vector& y);

/// OLS fit plus stderrs scaled by `sigma` (known or estimated).
FitResult fit_model(const DesignMatrix& x, const ModelSet& model, const Vector& y,
                    double sigma);

/// Incrementally maintained orthonormal basis of the span of the selected
/// columns. Projections cost O(n k) instead of forming n x n matrices.
class IncrementalProjector {
 public:
  explicit IncrementalProjector(Eigen::Index n);

  std::size_t rank() const { return static_cast<std::size_t>(basis_.cols()); }

  /// P^perp v against the current basis (two Gram-Schmidt passes).
  Vector residual(const Vector& v) const;

  /// Adds `column` to the span. Returns false (and leaves the basis unchanged)
  /// when its residual norm is <= rel_tol * ||column||.
  bool append(const Vector& column, double rel_tol = kRankTol);

  const Matrix& basis() const { return basis_; }

 private:
  Matrix basis_;
};

}  // namespace stabposi
