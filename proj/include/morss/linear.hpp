#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "morss/common.hpp"

namespace morss {

// Conditioning beyond this is treated as singular.
inline constexpr double kMaxCondition = 1e12;

namespace detail {

// Symmetric positive-definite solver with an explicit conditioning gate.
// All estimators funnel their normal equations through this one path so that
// parameter choices which reduce one estimator to another (k = 0, d = 0, ...)
// reproduce the reduced estimator bit for bit.
class SpdSolver {
 public:
  SpdSolver(const Eigen::MatrixXd& a, const std::string& what) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a,
                                                      Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || !std::isfinite(hi) || hi / lo > kMaxCondition)
      throw SingularSystemError(what + " is singular or too ill-conditioned");
    condition_ = hi / lo;
    ldlt_.compute(a);
    if (ldlt_.info() != Eigen::Success)
      throw SingularSystemError(what + " could not be factorised");
  }

  double condition() const { return condition_; }

  template <class Rhs>
  auto solve(const Rhs& b) const {
    return ldlt_.solve(b).eval();
  }

 private:
  Eigen::LDLT<Eigen::MatrixXd> ldlt_;
  double condition_ = 0.0;
};

inline void require_continuous(const Dataset& data, const char* where) {
  if (data.kind != ResponseKind::Continuous)
    throw InvalidInputError(std::string(where) +
                            " expects a continuous response");
  if (data.X.rows() != data.y.size())
    throw InvalidInputError("design and response sizes disagree");
  if (data.n() <= data.p())
    throw InvalidInputError("need more observations than predictors");
}

// S + k I without forming an intermediate; adding k = 0 leaves S unchanged.
inline Eigen::MatrixXd shrunk_gram(const Eigen::MatrixXd& s, double k) {
  Eigen::MatrixXd a = s;
  a.diagonal().array() += k;
  return a;
}

}  // namespace detail

struct EstimatorMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// Eigen-structure of the cross-product matrix S = X'X: S = U diag(lambda) U'
// with eigenvalues sorted descending, plus the rotated design Z = X U (so
// Z'Z = diag(lambda)).
struct CanonicalForm {
  Eigen::MatrixXd rotation;          // U, orthonormal columns
  Eigen::VectorXd eigenvalues;       // descending, all > 0
  Eigen::MatrixXd transformed_design;  // Z = X U
};

// ---------------------------------------------------------------------------
// Fits.
// ---------------------------------------------------------------------------

inline FitResult ls_fit(const Dataset& data) {
  detail::require_continuous(data, "least squares");
  const Eigen::MatrixXd s = data.X.transpose() * data.X;
  const Eigen::VectorXd xty = data.X.transpose() * data.y;
  detail::SpdSolver solver(s, "normal-equation matrix");
  FitResult out;
  out.beta = solver.solve(xty);
  out.condition = solver.condition();
  const double rss = (data.y - data.X * out.beta).squaredNorm();
  out.sigma2_hat = rss / static_cast<double>(data.n() - data.p());
  return out;
}

inline FitResult ridge_fit(const Dataset& data, double k) {
  detail::require_continuous(data, "ridge");
  if (!(k >= 0.0)) throw InvalidInputError("ridge constant k must be >= 0");
  const Eigen::MatrixXd s = data.X.transpose() * data.X;
  const Eigen::VectorXd xty = data.X.transpose() * data.y;
  detail::SpdSolver solver(detail::shrunk_gram(s, k), "shrunken normal-equation matrix");
  FitResult out;
  out.beta = solver.solve(xty);
  out.condition = solver.condition();
  out.params = ShrinkageParams{k, 0.0, SelectionRule::Manual};
  const double rss = (data.y - data.X * out.beta).squaredNorm();
  out.sigma2_hat = rss / static_cast<double>(data.n() - data.p());
  return out;
}

// Two-parameter shrinkage: solves (S + kI) b = X'y + d * b_ridge(k).
// d = 0 reduces to ridge with the same k; k = 0, d = 0 reduces to least
// squares. d may take either sign.
inline FitResult liu_type_fit(const Dataset& data, double k, double d) {
  detail::require_continuous(data, "liu-type");
  if (!(k >= 0.0)) throw InvalidInputError("ridge constant k must be >= 0");
  if (!std::isfinite(d)) throw InvalidInputError("shrinkage d must be finite");
  const Eigen::MatrixXd s = data.X.transpose() * data.X;
  const Eigen::VectorXd xty = data.X.transpose() * data.y;
  detail::SpdSolver solver(detail::shrunk_gram(s, k), "shrunken normal-equation matrix");
  const Eigen::VectorXd b_ridge = solver.solve(xty);
  FitResult out;
  out.beta = solver.solve((xty + d * b_ridge).eval());
  out.condition = solver.condition();
  out.params = ShrinkageParams{k, d, SelectionRule::Manual};
  const double rss = (data.y - data.X * out.beta).squaredNorm();
  out.sigma2_hat = rss / static_cast<double>(data.n() - data.p());
  return out;
}

inline CanonicalForm canonical_form(const Dataset& data) {
  detail::require_continuous(data, "canonical form");
  const Eigen::MatrixXd s = data.X.transpose() * data.X;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  if (es.info() != Eigen::Success)
    throw SingularSystemError("eigendecomposition of X'X failed");
  const Eigen::Index p = data.p();
  CanonicalForm cf;
  cf.eigenvalues.resize(p);
  cf.rotation.resize(p, p);
  // Eigen returns ascending order; flip to descending. X'X is positive
  // semidefinite, so tiny negative eigenvalues are rounding noise.
  for (Eigen::Index j = 0; j < p; ++j) {
    cf.eigenvalues[j] = std::max(0.0, es.eigenvalues()[p - 1 - j]);
    cf.rotation.col(j) = es.eigenvectors().col(p - 1 - j);
  }
  cf.transformed_design = data.X * cf.rotation;
  return cf;
}

// ---------------------------------------------------------------------------
// Data-driven shrinkage constants.
// ---------------------------------------------------------------------------

enum class HkbVariant {
  SigmaSquared,  // k = p * sigma2_hat / (b'b), the classical rule (default)
  Sigma,         // k = p * sigma_hat  / (b'b), scale-dependent alternative
};

inline ShrinkageParams select_k_hkb(const Dataset& data,
                                    HkbVariant variant = HkbVariant::SigmaSquared) {
  const FitResult ls = ls_fit(data);
  const double btb = ls.beta.squaredNorm();
  if (!(btb > 0.0) || !std::isfinite(btb))
    throw DegenerateCoefficientsError(
        "least-squares coefficients vanish; ridge rule undefined");
  const double s2 = *ls.sigma2_hat;
  const double p = static_cast<double>(data.p());
  const double k = variant == HkbVariant::SigmaSquared ? p * s2 / btb
                                                       : p * std::sqrt(s2) / btb;
  return ShrinkageParams{k, 0.0, SelectionRule::Hkb};
}

// Joint (k, d) rule for the two-parameter estimator. k targets a spectral
// condition number of 100 for S + kI (clamped at zero when S is already that
// well conditioned); d then minimises the estimated mean squared error at
// that k, which may make d negative.
inline ShrinkageParams select_kd_liu(const Dataset& data) {
  const CanonicalForm cf = canonical_form(data);
  const Eigen::Index p = data.p();
  const Eigen::VectorXd& lam = cf.eigenvalues;
  if (!(lam[p - 1] > 0.0) || lam[0] / lam[p - 1] > kMaxCondition)
    throw SingularSystemError("X'X is singular or too ill-conditioned");
  const double k =
      std::max(0.0, (lam[0] - 100.0 * lam[p - 1]) / 99.0);
  const Eigen::VectorXd zty = cf.transformed_design.transpose() * data.y;
  Eigen::VectorXd alpha(p);
  for (Eigen::Index j = 0; j < p; ++j) alpha[j] = zty[j] / (lam[j] + k);
  const Eigen::VectorXd b_ridge = cf.rotation * alpha;
  const double rss = (data.y - data.X * b_ridge).squaredNorm();
  const double s2 = rss / static_cast<double>(data.n() - data.p());
  double num = 0.0, den = 0.0;
  for (Eigen::Index j = 0; j < p; ++j) {
    const double lk = lam[j] + k;
    num += lam[j] * (s2 - k * alpha[j] * alpha[j]) / (lk * lk * lk);
    den += lam[j] * (lam[j] * alpha[j] * alpha[j] + s2) / (lk * lk * lk * lk);
  }
  if (!(den > 0.0) || !std::isfinite(num))
    throw SelectionFailureError("degenerate denominator in d rule");
  return ShrinkageParams{k, -num / den, SelectionRule::LiuType};
}

// ---------------------------------------------------------------------------
// Exact first and second moments under y = X b + e, e ~ N(0, sigma2 I).
// ---------------------------------------------------------------------------

inline EstimatorMoments ls_moments(const Eigen::MatrixXd& x,
                                   const Eigen::VectorXd& beta, double sigma2) {
  const Eigen::MatrixXd s = x.transpose() * x;
  detail::SpdSolver solver(s, "normal-equation matrix");
  EstimatorMoments m;
  m.mean = beta;
  m.cov = sigma2 * solver.solve(Eigen::MatrixXd::Identity(x.cols(), x.cols()));
  return m;
}

inline EstimatorMoments ridge_moments(const Eigen::MatrixXd& x,
                                      const Eigen::VectorXd& beta,
                                      double sigma2, double k) {
  if (!(k >= 0.0)) throw InvalidInputError("ridge constant k must be >= 0");
  const Eigen::MatrixXd s = x.transpose() * x;
  detail::SpdSolver shrunk(detail::shrunk_gram(s, k), "shrunken normal-equation matrix");
  detail::SpdSolver plain(s, "normal-equation matrix");
  const Eigen::MatrixXd w = shrunk.solve(s);  // (S + kI)^{-1} S
  const Eigen::MatrixXd sinv =
      plain.solve(Eigen::MatrixXd::Identity(x.cols(), x.cols()));
  EstimatorMoments m;
  m.mean = w * beta;
  m.cov = sigma2 * w * sinv * w.transpose();
  return m;
}

inline EstimatorMoments liu_moments(const Eigen::MatrixXd& x,
                                    const Eigen::VectorXd& beta, double sigma2,
                                    double k, double d) {
  if (!(k >= 0.0)) throw InvalidInputError("ridge constant k must be >= 0");
  const Eigen::Index p = x.cols();
  const Eigen::MatrixXd s = x.transpose() * x;
  detail::SpdSolver shrunk(detail::shrunk_gram(s, k), "shrunken normal-equation matrix");
  detail::SpdSolver plain(s, "normal-equation matrix");
  const Eigen::MatrixXd t = shrunk.solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd a = t * (Eigen::MatrixXd::Identity(p, p) + d * t) * s;
  const Eigen::MatrixXd sinv = plain.solve(Eigen::MatrixXd::Identity(p, p));
  EstimatorMoments m;
  m.mean = a * beta;
  m.cov = sigma2 * a * sinv * a.transpose();
  return m;
}

}  // namespace morss
