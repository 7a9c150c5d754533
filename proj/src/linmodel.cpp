#include "stabposi/linmodel.hpp"

#include "stabposi/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace stabposi {

DesignMatrix::DesignMatrix(Matrix entries) : entries_(std::move(entries)) {
  require(entries_.rows() >= 1 && entries_.cols() >= 1, "design matrix must be at least 1x1");
  require(entries_.allFinite(), "design matrix has non-finite entries");
  col_norms_ = entries_.colwise().norm().transpose();
  l2inf_norm_ = col_norms_.maxCoeff();
  linf_norm_ = entries_.cwiseAbs().maxCoeff();
}

DesignMatrix DesignMatrix::select_rows(const std::vector<Eigen::Index>& rows) const {
  Matrix sub(static_cast<Eigen::Index>(rows.size()), d());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i] >= 0 && rows[i] < n(), "row index out of range");
    sub.row(static_cast<Eigen::Index>(i)) = entries_.row(rows[i]);
  }
  return DesignMatrix(std::move(sub));
}

ModelSet::ModelSet(std::initializer_list<std::size_t> indices)
    : ModelSet(std::vector<std::size_t>(indices)) {}

ModelSet::ModelSet(std::vector<std::size_t> indices) : indices_(std::move(indices)) {
  std::sort(indices_.begin(), indices_.end());
  if (std::adjacent_find(indices_.begin(), indices_.end()) != indices_.end()) {
    throw InvalidArgument("model set contains duplicate indices");
  }
}

bool ModelSet::contains(std::size_t j) const {
  return std::binary_search(indices_.begin(), indices_.end(), j);
}

std::size_t ModelSet::position(std::size_t j) const {
  auto it = std::lower_bound(indices_.begin(), indices_.end(), j);
  if (it == indices_.end() || *it != j) {
    throw InvalidArgument("feature " + std::to_string(j) + " is not in the model");
  }
  return static_cast<std::size_t>(it - indices_.begin());
}

ModelSet ModelSet::with(std::size_t j) const {
  if (contains(j)) return *this;
  auto next = indices_;
  next.push_back(j);
  return ModelSet(std::move(next));
}

ModelSet ModelSet::without(std::size_t j) const {
  auto next = indices_;
  next.erase(std::remove(next.begin(), next.end(), j), next.end());
  return ModelSet(std::move(next));
}

void ModelSet::check_within(Eigen::Index d) const {
  if (!indices_.empty() && indices_.back() >= static_cast<std::size_t>(d)) {
    throw InvalidArgument("model index " + std::to_string(indices_.back()) +
                          " out of range for d = " + std::to_string(d));
  }
}

SubmodelQR::SubmodelQR(const DesignMatrix& x, const ModelSet& model) : size_(model.size()) {
  model.check_within(x.d());
  const Eigen::Index n = x.n();
  const auto k = static_cast<Eigen::Index>(size_);
  if (k == 0) {
    q_.resize(n, 0);
    r_.resize(0, 0);
    return;
  }
  if (k > n) {
    throw RankDeficient("model has " + std::to_string(k) + " columns but only " +
                        std::to_string(n) + " rows");
  }
  Matrix xm(n, k);
  for (Eigen::Index c = 0; c < k; ++c) xm.col(c) = x.col(static_cast<Eigen::Index>(model[c]));

  Eigen::HouseholderQR<Matrix> qr(xm);
  q_ = qr.householderQ() * Matrix::Identity(n, k);
  r_ = qr.matrixQR().topLeftCorner(k, k).triangularView<Eigen::Upper>();

  Eigen::JacobiSVD<Matrix> svd(r_);
  const auto& sv = svd.singularValues();
  const double smax = sv.maxCoeff();
  const double smin = sv.minCoeff();
  if (!(smax > 0.0) || !(smin > kRankTol * smax)) {
    throw RankDeficient("submodel design is rank deficient (singular value ratio " +
                        std::to_string(smax > 0.0 ? smin / smax : 0.0) + ")");
  }
}

Vector SubmodelQR::solve(const Vector& v) const {
  if (v.size() != q_.rows()) {
    throw DimensionMismatch("response has length " + std::to_string(v.size()) + ", expected " +
                            std::to_string(q_.rows()));
  }
  if (size_ == 0) return Vector(0);
  Vector qtv = q_.transpose() * v;
  return r_.triangularView<Eigen::Upper>().solve(qtv);
}

Vector SubmodelQR::gram_inverse_diag_sqrt() const {
  const auto k = static_cast<Eigen::Index>(size_);
  if (k == 0) return Vector(0);
  Matrix rinv = r_.triangularView<Eigen::Upper>().solve(Matrix::Identity(k, k));
  return rinv.rowwise().norm();
}

Vector SubmodelQR::residual(const Vector& v) const {
  if (v.size() != q_.rows()) throw DimensionMismatch("vector length does not match design rows");
  if (size_ == 0) return v;
  Vector r = v - q_ * (q_.transpose() * v);
  return r;
}

Vector ols_fit(const DesignMatrix& x, const ModelSet& model, const Vector& y) {
  if (y.size() != x.n()) {
    throw DimensionMismatch("response has length " + std::to_string(y.size()) + ", expected n = " +
                            std::to_string(x.n()));
  }
  return SubmodelQR(x, model).solve(y);
}

Vector target_coefficients(const DesignMatrix& x, const ModelSet& model, const Vector& mu) {
  return ols_fit(x, model, mu);
}

Matrix residual_projector(const DesignMatrix& x, const ModelSet& model) {
  SubmodelQR qr(x, model);
  const Eigen::Index n = x.n();
  Matrix p = Matrix::Identity(n, n);
  if (model.empty()) return p;
  p.noalias() -= qr.q() * qr.q().transpose();
  // Symmetrize to remove rounding asymmetry of the product.
  Matrix sym = 0.5 * (p + p.transpose());
  return sym;
}

Vector stderr_known_sigma(const DesignMatrix& x, const ModelSet& model, double sigma) {
  require(sigma > 0.0 && std::isfinite(sigma), "sigma must be positive and finite");
  return sigma * SubmodelQR(x, model).gram_inverse_diag_sqrt();
}

SigmaEstimate sigma_hat_full_model(const DesignMatrix& x, const Vector& y) {
  if (x.n() <= x.d()) {
    throw InsufficientSamples("full-model sigma estimate needs n > d (n = " +
                              std::to_string(x.n()) + ", d = " + std::to_string(x.d()) + ")");
  }
  if (y.size() != x.n()) throw DimensionMismatch("response length does not match design rows");
  std::vector<std::size_t> all(static_cast<std::size_t>(x.d()));
  for (std::size_t j = 0; j < all.size(); ++j) all[j] = j;
  SubmodelQR qr(x, ModelSet(std::move(all)));
  const double rss = qr.residual(y).squaredNorm();
  const int dof = static_cast<int>(x.n() - x.d());
  return {std::sqrt(rss / dof), dof};
}

FitResult fit_model(const DesignMatrix& x, const ModelSet& model, const Vector& y, double sigma) {
  require(sigma >= 0.0 && std::isfinite(sigma), "sigma must be nonnegative and finite");
  if (y.size() != x.n()) throw DimensionMismatch("response length does not match design rows");
  SubmodelQR qr(x, model);
  return {model, qr.solve(y), sigma * qr.gram_inverse_diag_sqrt()};
}

IncrementalProjector::IncrementalProjector(Eigen::Index n) : basis_(n, 0) {}

Vector IncrementalProjector::residual(const Vector& v) const {
  if (v.size() != basis_.rows()) throw DimensionMismatch("vector length does not match basis");
  Vector r = v;
  if (basis_.cols() == 0) return r;
  for (int pass = 0; pass < 2; ++pass) r.noalias() -= basis_ * (basis_.transpose() * r);
  return r;
}

bool IncrementalProjector::append(const Vector& column, double rel_tol) {
  const double norm = column.norm();
  Vector r = residual(column);
  const double rnorm = r.norm();
  if (!(norm > 0.0) || rnorm <= rel_tol * norm) return false;
  basis_.conservativeResize(Eigen::NoChange, basis_.cols() + 1);
  basis_.col(basis_.cols() - 1) = r / rnorm;
  return true;
}

}  // namespace stabposi
