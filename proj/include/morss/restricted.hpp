#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "morss/common.hpp"
#include "morss/linear.hpp"

namespace morss {

// Conditioning gate for prior covariance matrices that must be inverted
// explicitly (the closed algebraic forms; the default update forms never
// invert omega).
inline constexpr double kMaxOmegaCondition = 1e10;

// Stochastic linear restriction r = R b + e, e ~ (0, sigma2 * omega),
// entering the fit with confidence weight v.
struct RestrictionSpec {
  Eigen::MatrixXd R;      // j x p, full row rank
  Eigen::VectorXd r;      // j
  Eigen::MatrixXd omega;  // j x j, symmetric positive definite
  double v = 1.0;         // 0 < v <= 1
};

namespace detail {

inline void validate_restriction(const RestrictionSpec& restr, Eigen::Index p) {
  const Eigen::Index j = restr.R.rows();
  if (j < 1 || restr.R.cols() != p)
    throw InvalidInputError("restriction matrix has wrong shape");
  if (restr.r.size() != j)
    throw InvalidInputError("restriction target length disagrees with R");
  if (restr.omega.rows() != j || restr.omega.cols() != j)
    throw InvalidInputError("restriction covariance has wrong shape");
  if (!(restr.v > 0.0) || !(restr.v <= 1.0))
    throw InvalidInputError("restriction weight v must lie in (0, 1]");
  const double scale = std::max(1.0, restr.omega.cwiseAbs().maxCoeff());
  if ((restr.omega - restr.omega.transpose()).cwiseAbs().maxCoeff() >
      1e-12 * scale)
    throw InvalidInputError("restriction covariance must be symmetric");
  if (j > p || Eigen::FullPivLU<Eigen::MatrixXd>(restr.R).rank() < j)
    throw InvalidInputError("restriction rows must be linearly independent");
}

// v * S^{-1} R' (omega + v R S^{-1} R')^{-1} (r - R b): the update that pulls
// an unrestricted estimate b toward the restriction without inverting omega.
inline Eigen::VectorXd restriction_correction(const SpdSolver& s_solver,
                                              const RestrictionSpec& restr,
                                              const Eigen::VectorXd& b) {
  const Eigen::MatrixXd sinv_rt = s_solver.solve(restr.R.transpose());
  const Eigen::MatrixXd cap = restr.omega + restr.v * restr.R * sinv_rt;
  SpdSolver cap_solver(cap, "restriction capacitance matrix");
  const Eigen::VectorXd gap = restr.r - restr.R * b;
  return restr.v * sinv_rt * cap_solver.solve(gap);
}

// Explicit omega inverse, wanted only by the closed forms and the moment
// formulas. Gated harder than the general solver because the result is
// multiplied back in full.
inline Eigen::MatrixXd omega_inverse(const Eigen::MatrixXd& omega) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(omega,
                                                    Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || !std::isfinite(hi) || hi / lo > kMaxOmegaCondition)
    throw SingularSystemError(
        "restriction covariance is singular or too ill-conditioned to invert");
  return Eigen::LDLT<Eigen::MatrixXd>(omega).solve(
      Eigen::MatrixXd::Identity(omega.rows(), omega.cols()));
}

}  // namespace detail

// (A + B C D)^{-1} via the matrix inversion identity
//   A^{-1} - A^{-1} B (C^{-1} + D A^{-1} B)^{-1} D A^{-1},
// useful when A is cheap to invert and C is small.
inline Eigen::MatrixXd woodbury_inverse(const Eigen::MatrixXd& a,
                                        const Eigen::MatrixXd& b,
                                        const Eigen::MatrixXd& c,
                                        const Eigen::MatrixXd& d) {
  if (a.rows() != a.cols() || c.rows() != c.cols())
    throw InvalidInputError("A and C must be square");
  if (b.rows() != a.rows() || b.cols() != c.rows() || d.rows() != c.cols() ||
      d.cols() != a.cols())
    throw InvalidInputError("update factor shapes disagree");
  Eigen::FullPivLU<Eigen::MatrixXd> lu_a(a);
  if (!lu_a.isInvertible()) throw SingularSystemError("A is not invertible");
  Eigen::FullPivLU<Eigen::MatrixXd> lu_c(c);
  if (!lu_c.isInvertible()) throw SingularSystemError("C is not invertible");
  const Eigen::MatrixXd a_inv =
      lu_a.solve(Eigen::MatrixXd::Identity(a.rows(), a.cols()));
  const Eigen::MatrixXd c_inv =
      lu_c.solve(Eigen::MatrixXd::Identity(c.rows(), c.cols()));
  const Eigen::MatrixXd cap = c_inv + d * a_inv * b;
  Eigen::FullPivLU<Eigen::MatrixXd> lu_cap(cap);
  if (!lu_cap.isInvertible())
    throw SingularSystemError("capacitance matrix is not invertible");
  return a_inv - a_inv * b * lu_cap.solve(d * a_inv);
}

// ---------------------------------------------------------------------------
// Fits. Each estimator is "base fit + restriction correction"; the *_closed
// variants compute the same quantity in one solve with omega inverted
// explicitly, and exist so the two routes can be checked against each other.
// ---------------------------------------------------------------------------

inline FitResult mixed_fit(const Dataset& data, const RestrictionSpec& restr) {
  detail::require_continuous(data, "mixed estimation");
  detail::validate_restriction(restr, data.p());
  const Eigen::MatrixXd s = data.X.transpose() * data.X;
  const Eigen::VectorXd xty = data.X.transpose() * data.y;
  detail::SpdSolver solver(s, "normal-equation matrix");
  FitResult out;
  const Eigen::VectorXd b_ls = solver.solve(xty);
  out.beta = b_ls + detail::restriction_correction(solver, restr, b_ls);
  out.condition = solver.condition();
  return out;
}

inline FitResult mixed_fit_closed(const Dataset& data,
                                  const RestrictionSpec& restr) {
  detail::require_continuous(data, "mixed estimation");
  detail::validate_restriction(restr, data.p());
  const Eigen::MatrixXd s = data.X.transpose() * data.X;
  const Eigen::MatrixXd oinv = detail::omega_inverse(restr.omega);
  const Eigen::MatrixXd g = s + restr.v * restr.R.transpose() * oinv * restr.R;
  detail::SpdSolver solver(g, "restricted normal-equation matrix");
  FitResult out;
  out.beta = solver.solve(
      (data.X.transpose() * data.y +
       restr.v * restr.R.transpose() * (oinv * restr.r))
          .eval());
  out.condition = solver.condition();
  return out;
}

// One-parameter shrinkage of the least-squares fit:
// b(d) = (S + I)^{-1} (S + dI) b_ls; d = 1 returns least squares.
inline FitResult liu_one_fit(const Dataset& data, double d) {
  detail::require_continuous(data, "one-parameter shrinkage");
  if (!std::isfinite(d)) throw InvalidInputError("shrinkage d must be finite");
  const Eigen::MatrixXd s = data.X.transpose() * data.X;
  const Eigen::VectorXd xty = data.X.transpose() * data.y;
  detail::SpdSolver plain(s, "normal-equation matrix");
  detail::SpdSolver shifted(detail::shrunk_gram(s, 1.0),
                            "shifted normal-equation matrix");
  const Eigen::VectorXd b_ls = plain.solve(xty);
  FitResult out;
  Eigen::VectorXd rhs = s * b_ls + d * b_ls;
  out.beta = shifted.solve(rhs);
  out.condition = plain.condition();
  out.params = ShrinkageParams{0.0, d, SelectionRule::Manual};
  return out;
}

// Mixed estimate with the restriction applied around the shrunken base fit:
// b = b(d) + correction(b(d)); d = 1 reduces to the plain mixed estimator.
inline FitResult srl_fit(const Dataset& data, const RestrictionSpec& restr,
                         double d) {
  detail::validate_restriction(restr, data.p());
  FitResult base = liu_one_fit(data, d);
  const Eigen::MatrixXd s = data.X.transpose() * data.X;
  detail::SpdSolver solver(s, "normal-equation matrix");
  base.beta += detail::restriction_correction(solver, restr, base.beta);
  return base;
}

// Same estimate in one solve: (S + vR'O⁻¹R)⁻¹ (F_d X'y + vR'O⁻¹r) with
// F_d = (S+I)⁻¹(S+dI) and O the restriction covariance.
inline FitResult srl_fit_closed(const Dataset& data,
                                const RestrictionSpec& restr, double d) {
  detail::require_continuous(data, "restricted shrinkage");
  detail::validate_restriction(restr, data.p());
  const Eigen::MatrixXd s = data.X.transpose() * data.X;
  const Eigen::VectorXd xty = data.X.transpose() * data.y;
  detail::SpdSolver shifted(detail::shrunk_gram(s, 1.0),
                            "shifted normal-equation matrix");
  const Eigen::VectorXd fd_xty =
      shifted.solve((detail::shrunk_gram(s, d) * xty).eval());
  const Eigen::MatrixXd oinv = detail::omega_inverse(restr.omega);
  const Eigen::MatrixXd g = s + restr.v * restr.R.transpose() * oinv * restr.R;
  detail::SpdSolver solver(g, "restricted normal-equation matrix");
  FitResult out;
  out.beta = solver.solve(
      (fd_xty + restr.v * restr.R.transpose() * (oinv * restr.r)).eval());
  out.condition = solver.condition();
  out.params = ShrinkageParams{0.0, d, SelectionRule::Manual};
  return out;
}

// Ridge base fit plus restriction correction; k = 0 reduces to mixed.
inline FitResult srr_fit(const Dataset& data, const RestrictionSpec& restr,
                         double k) {
  detail::validate_restriction(restr, data.p());
  FitResult base = ridge_fit(data, k);
  const Eigen::MatrixXd s = data.X.transpose() * data.X;
  detail::SpdSolver solver(s, "normal-equation matrix");
  base.beta += detail::restriction_correction(solver, restr, base.beta);
  return base;
}

// Same estimate in one solve: (S + vR'O⁻¹R)⁻¹ (M X'y + vR'O⁻¹r) with
// M = (S+kI)⁻¹S and O the restriction covariance.
inline FitResult srr_fit_closed(const Dataset& data,
                                const RestrictionSpec& restr, double k) {
  detail::require_continuous(data, "restricted shrinkage");
  detail::validate_restriction(restr, data.p());
  if (!(k >= 0.0)) throw InvalidInputError("ridge constant k must be >= 0");
  const Eigen::MatrixXd s = data.X.transpose() * data.X;
  const Eigen::VectorXd xty = data.X.transpose() * data.y;
  detail::SpdSolver shrunk(detail::shrunk_gram(s, k),
                           "shrunken normal-equation matrix");
  const Eigen::VectorXd w_xty = shrunk.solve((s * xty).eval());
  const Eigen::MatrixXd oinv = detail::omega_inverse(restr.omega);
  const Eigen::MatrixXd g = s + restr.v * restr.R.transpose() * oinv * restr.R;
  detail::SpdSolver solver(g, "restricted normal-equation matrix");
  FitResult out;
  out.beta = solver.solve(
      (w_xty + restr.v * restr.R.transpose() * (oinv * restr.r)).eval());
  out.condition = solver.condition();
  out.params = ShrinkageParams{k, 0.0, SelectionRule::Manual};
  return out;
}

// One-parameter shrinkage applied on top of the mixed estimate:
// b = (S + I)^{-1} (S + dI) b_mixed.
inline FitResult mixed_liu_fit(const Dataset& data,
                               const RestrictionSpec& restr, double d) {
  FitResult base = mixed_fit(data, restr);
  const Eigen::MatrixXd s = data.X.transpose() * data.X;
  detail::SpdSolver shifted(detail::shrunk_gram(s, 1.0),
                            "shifted normal-equation matrix");
  Eigen::VectorXd rhs = s * base.beta + d * base.beta;
  base.beta = shifted.solve(rhs);
  base.params = ShrinkageParams{0.0, d, SelectionRule::Manual};
  return base;
}

// Ridge shrinkage applied on top of the mixed estimate:
// b = (I + k S^{-1})^{-1} b_mixed = (S + kI)^{-1} S b_mixed.
inline FitResult mixed_ridge_fit(const Dataset& data,
                                 const RestrictionSpec& restr, double k) {
  if (!(k >= 0.0)) throw InvalidInputError("ridge constant k must be >= 0");
  FitResult base = mixed_fit(data, restr);
  const Eigen::MatrixXd s = data.X.transpose() * data.X;
  detail::SpdSolver shrunk(detail::shrunk_gram(s, k),
                           "shrunken normal-equation matrix");
  base.beta = shrunk.solve((s * base.beta).eval());
  base.params = ShrinkageParams{k, 0.0, SelectionRule::Manual};
  return base;
}

// ---------------------------------------------------------------------------
// Exact moments under y = X b + e, e ~ N(0, sigma2 I), with a stochastic
// restriction r = R b + u, u ~ (0, sigma2 * omega) independent of e.
// ---------------------------------------------------------------------------

inline EstimatorMoments srl_moments(const Eigen::MatrixXd& x,
                                    const Eigen::VectorXd& beta, double sigma2,
                                    const RestrictionSpec& restr, double d) {
  detail::validate_restriction(restr, x.cols());
  const Eigen::Index p = x.cols();
  const Eigen::MatrixXd s = x.transpose() * x;
  const Eigen::MatrixXd oinv = detail::omega_inverse(restr.omega);
  const Eigen::MatrixXd rtor = restr.R.transpose() * oinv * restr.R;
  detail::SpdSolver g_solver(s + restr.v * rtor,
                             "restricted normal-equation matrix");
  const Eigen::MatrixXd a =
      g_solver.solve(Eigen::MatrixXd::Identity(p, p));
  detail::SpdSolver shifted(detail::shrunk_gram(s, 1.0),
                            "shifted normal-equation matrix");
  const Eigen::MatrixXd f =
      shifted.solve(detail::shrunk_gram(s, d));  // (S+I)^{-1}(S+dI)
  EstimatorMoments m;
  m.mean = beta + a * ((f - Eigen::MatrixXd::Identity(p, p)) * (s * beta));
  m.cov = sigma2 * a *
          (f * s * f.transpose() + restr.v * restr.v * rtor) * a;
  return m;
}

inline EstimatorMoments srr_moments(const Eigen::MatrixXd& x,
                                    const Eigen::VectorXd& beta, double sigma2,
                                    const RestrictionSpec& restr, double k) {
  if (!(k >= 0.0)) throw InvalidInputError("ridge constant k must be >= 0");
  detail::validate_restriction(restr, x.cols());
  const Eigen::Index p = x.cols();
  const Eigen::MatrixXd s = x.transpose() * x;
  const Eigen::MatrixXd oinv = detail::omega_inverse(restr.omega);
  const Eigen::MatrixXd rtor = restr.R.transpose() * oinv * restr.R;
  detail::SpdSolver g_solver(s + restr.v * rtor,
                             "restricted normal-equation matrix");
  const Eigen::MatrixXd a =
      g_solver.solve(Eigen::MatrixXd::Identity(p, p));
  detail::SpdSolver shrunk(detail::shrunk_gram(s, k),
                           "shrunken normal-equation matrix");
  const Eigen::MatrixXd w = shrunk.solve(s);  // (S+kI)^{-1} S
  EstimatorMoments m;
  m.mean = beta + a * ((w - Eigen::MatrixXd::Identity(p, p)) * (s * beta));
  m.cov = sigma2 * a *
          (w * s * w.transpose() + restr.v * restr.v * rtor) * a;
  return m;
}

}  // namespace morss
