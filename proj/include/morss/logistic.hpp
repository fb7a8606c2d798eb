#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "morss/common.hpp"
#include "morss/linear.hpp"

namespace morss {

struct LogisticOptions {
  double tol = 1e-8;            // on step norm and gradient norm
  int max_iter = 100;
  int max_halvings = 20;        // line-search bisections per Newton step
  double divergence_norm = 1e6; // ||beta|| beyond this means separation
};

struct LogisticFitResult {
  Eigen::VectorXd beta;
  bool converged = false;
  int iterations = 0;
  std::optional<ShrinkageParams> params;
};

// Numerically safe logistic function.
inline double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// P(y = 1 | x) under coefficient vector beta.
inline double link(const Eigen::VectorXd& x, const Eigen::VectorXd& beta) {
  if (x.size() != beta.size())
    throw InvalidInputError("covariate/coefficient length mismatch");
  return sigmoid(x.dot(beta));
}

// Bernoulli log-likelihood sum_i [ y_i t_i - log(1 + exp(t_i)) ], t = X beta,
// evaluated without overflow for large |t|.
inline double log_likelihood(const Dataset& data, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd t = data.X * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    const double ti = t[i];
    if (ti > 0.0)
      ll += data.y[i] * ti - ti - std::log1p(std::exp(-ti));
    else
      ll += data.y[i] * ti - std::log1p(std::exp(ti));
  }
  return ll;
}

namespace detail {

inline void require_binary(const Dataset& data, const char* where) {
  if (data.kind != ResponseKind::Binary)
    throw InvalidInputError(std::string(where) + " expects a binary response");
  if (data.X.rows() != data.y.size())
    throw InvalidInputError("design and response sizes disagree");
  for (Eigen::Index i = 0; i < data.y.size(); ++i)
    if (data.y[i] != 0.0 && data.y[i] != 1.0)
      throw InvalidInputError("binary response must contain only 0 and 1");
}

// Working weights pi * (1 - pi) at the given coefficients.
inline Eigen::VectorXd irls_weights(const Dataset& data,
                                    const Eigen::VectorXd& beta) {
  Eigen::VectorXd v(data.n());
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const double pi = sigmoid(data.X.row(i).dot(beta));
    v[i] = pi * (1.0 - pi);
  }
  return v;
}

}  // namespace detail

// Fisher information (negative Hessian) X' V X at the given coefficients.
inline Eigen::MatrixXd weighted_gram(const Dataset& data,
                                     const Eigen::VectorXd& beta) {
  const Eigen::VectorXd v = detail::irls_weights(data, beta);
  return data.X.transpose() * v.asDiagonal() * data.X;
}

// State threaded through Newton/IRLS iterations.
struct IrlsState {
  Eigen::VectorXd beta;
  Eigen::VectorXd weights;  // current pi(1-pi) per observation
  int iteration = 0;
  double last_step_norm = std::numeric_limits<double>::infinity();
};

// One damped re-weighted least-squares update. The full step solves the
// weighted normal equations X'VX b = X'V z with working response
// z = X beta + V^{-1}(y - pi); substituting z gives the equivalent
// X'VX delta = X'(y - pi), which avoids dividing by vanishing weights.
// The step is halved until the log-likelihood stops decreasing; beta stays
// unchanged (step norm 0) if no improving step exists within the budget.
inline void irls_step(const Dataset& data, IrlsState& state,
                      const LogisticOptions& opts = {}) {
  state.weights = detail::irls_weights(data, state.beta);
  const Eigen::MatrixXd m =
      data.X.transpose() * state.weights.asDiagonal() * data.X;
  Eigen::VectorXd pi(data.n());
  for (Eigen::Index i = 0; i < data.n(); ++i)
    pi[i] = sigmoid(data.X.row(i).dot(state.beta));
  const Eigen::VectorXd grad = data.X.transpose() * (data.y - pi);
  const Eigen::VectorXd delta = Eigen::LDLT<Eigen::MatrixXd>(m).solve(grad);
  if (!delta.allFinite())
    throw SeparationError("working weights collapsed; data appear separated");
  const double ll_old = log_likelihood(data, state.beta);
  double scale = 1.0;
  for (int h = 0; h <= opts.max_halvings; ++h) {
    const Eigen::VectorXd trial = state.beta + scale * delta;
    if (log_likelihood(data, trial) >= ll_old) {
      state.beta = trial;
      state.last_step_norm = scale * delta.norm();
      ++state.iteration;
      return;
    }
    scale *= 0.5;
  }
  state.last_step_norm = 0.0;  // no admissible step
  ++state.iteration;
}

// Maximum-likelihood logistic fit. Converges when both the step and the
// score vector fall below tolerance; diverging coefficients or an exhausted
// iteration budget over separated data raise SeparationError, an exhausted
// budget otherwise raises ConvergenceError.
inline LogisticFitResult ml_fit(const Dataset& data,
                                const LogisticOptions& opts = {}) {
  detail::require_binary(data, "logistic fit");
  if (data.n() <= data.p())
    throw InvalidInputError("need more observations than predictors");
  IrlsState state;
  state.beta = Eigen::VectorXd::Zero(data.p());
  auto grad_norm = [&](const Eigen::VectorXd& beta) {
    Eigen::VectorXd pi(data.n());
    for (Eigen::Index i = 0; i < data.n(); ++i)
      pi[i] = sigmoid(data.X.row(i).dot(beta));
    return (data.X.transpose() * (data.y - pi)).norm();
  };
  while (state.iteration < opts.max_iter) {
    irls_step(data, state, opts);
    if (state.beta.norm() > opts.divergence_norm)
      throw SeparationError("coefficients diverged; data appear separated");
    if (state.last_step_norm <= opts.tol && grad_norm(state.beta) <= opts.tol) {
      LogisticFitResult out;
      out.beta = state.beta;
      out.converged = true;
      out.iterations = state.iteration;
      return out;
    }
    if (state.last_step_norm == 0.0 && grad_norm(state.beta) > opts.tol)
      throw ConvergenceError("line search stalled before reaching tolerance");
  }
  // Budget exhausted. Strictly positive margins on every observation mean a
  // separating hyperplane exists and no finite maximiser does.
  const Eigen::VectorXd t = data.X * state.beta;
  bool separated = true;
  for (Eigen::Index i = 0; i < data.n(); ++i)
    if ((data.y[i] > 0.5 ? t[i] : -t[i]) <= 0.0) separated = false;
  if (separated)
    throw SeparationError("no finite maximiser; data are separated");
  throw ConvergenceError("logistic fit did not converge within max_iter");
}

// Ridge-shrunken logistic estimate (M + kI)^{-1} M b_ml with M the Fisher
// information at the maximum-likelihood fit.
inline LogisticFitResult ridge_logistic_fit(const Dataset& data,
                                            const LogisticFitResult& ml,
                                            double k) {
  if (!(k >= 0.0)) throw InvalidInputError("ridge constant k must be >= 0");
  const Eigen::MatrixXd m = weighted_gram(data, ml.beta);
  detail::SpdSolver solver(detail::shrunk_gram(m, k),
                           "shrunken information matrix");
  LogisticFitResult out = ml;
  out.beta = solver.solve((m * ml.beta).eval());
  out.params = ShrinkageParams{k, 0.0, SelectionRule::Manual};
  return out;
}

inline LogisticFitResult ridge_logistic_fit(const Dataset& data, double k,
                                            const LogisticOptions& opts = {}) {
  return ridge_logistic_fit(data, ml_fit(data, opts), k);
}

// Two-parameter logistic shrinkage (M + kI)^{-1} (M - dI) b_ml; d = -k
// returns the maximum-likelihood fit, d = 0 the ridge fit.
inline LogisticFitResult liu_logistic_fit(const Dataset& data,
                                          const LogisticFitResult& ml,
                                          double k, double d) {
  if (!(k >= 0.0)) throw InvalidInputError("ridge constant k must be >= 0");
  if (!std::isfinite(d)) throw InvalidInputError("shrinkage d must be finite");
  const Eigen::MatrixXd m = weighted_gram(data, ml.beta);
  detail::SpdSolver solver(detail::shrunk_gram(m, k),
                           "shrunken information matrix");
  LogisticFitResult out = ml;
  out.beta = solver.solve((detail::shrunk_gram(m, -d) * ml.beta).eval());
  out.params = ShrinkageParams{k, d, SelectionRule::Manual};
  return out;
}

inline LogisticFitResult liu_logistic_fit(const Dataset& data, double k,
                                          double d,
                                          const LogisticOptions& opts = {}) {
  return liu_logistic_fit(data, ml_fit(data, opts), k, d);
}

// k = (p + 1) / ||b_ml||^2, where p counts the predictors excluding the
// intercept while the squared norm runs over the full coefficient vector
// (intercept included when the design has one).
inline ShrinkageParams select_k_logistic(const LogisticFitResult& ml, int p) {
  if (p < 1) throw InvalidInputError("predictor count must be >= 1");
  const double btb = ml.beta.squaredNorm();
  if (!(btb > 0.0) || !std::isfinite(btb))
    throw DegenerateCoefficientsError(
        "maximum-likelihood coefficients vanish; ridge rule undefined");
  return ShrinkageParams{static_cast<double>(p + 1) / btb, 0.0,
                         SelectionRule::LogisticKp1};
}

// Estimated mean squared error of the two-parameter logistic estimator as a
// function of d, in the eigenbasis of the Fisher information M = Q diag(mu) Q':
// variance part sum_j (mu_j - d)^2 / (mu_j (mu_j + k)^2) plus the squared
// bias (k + d)^2 sum_j gamma_j^2 / (mu_j + k)^2 at gamma = Q' b_ml.
inline double liu_logistic_mse(const Eigen::VectorXd& mu,
                               const Eigen::VectorXd& gamma, double k,
                               double d) {
  double v = 0.0, b = 0.0;
  for (Eigen::Index j = 0; j < mu.size(); ++j) {
    const double mk = mu[j] + k;
    v += (mu[j] - d) * (mu[j] - d) / (mu[j] * mk * mk);
    b += gamma[j] * gamma[j] / (mk * mk);
  }
  return v + (k + d) * (k + d) * b;
}

// Minimises the estimated mean squared error over d: coarse grid on
// [-k - 50, k + 50] at step 0.1, then golden-section refinement of the best
// grid cell down to width 1e-4.
inline ShrinkageParams select_d_logistic(const Dataset& data, double k,
                                         const LogisticFitResult& ml) {
  if (!(k >= 0.0)) throw InvalidInputError("ridge constant k must be >= 0");
  const Eigen::MatrixXd m = weighted_gram(data, ml.beta);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success)
    throw SelectionFailureError("eigendecomposition of information matrix failed");
  const Eigen::VectorXd mu = es.eigenvalues();
  if (!(mu.minCoeff() > 0.0))
    throw SelectionFailureError("information matrix is not positive definite");
  const Eigen::VectorXd gamma = es.eigenvectors().transpose() * ml.beta;

  const double lo = -k - 50.0, hi = k + 50.0, step = 0.1;
  double best_d = std::numeric_limits<double>::quiet_NaN();
  double best_f = std::numeric_limits<double>::infinity();
  const auto cells = static_cast<long>(std::llround((hi - lo) / step));
  for (long i = 0; i <= cells; ++i) {
    const double d = lo + step * static_cast<double>(i);
    const double f = liu_logistic_mse(mu, gamma, k, d);
    if (std::isfinite(f) && f < best_f) {
      best_f = f;
      best_d = d;
    }
  }
  if (!std::isfinite(best_f))
    throw SelectionFailureError("mean-squared-error surface is not finite");

  double a = best_d - step, b = best_d + step;
  const double inv_phi = 0.6180339887498949;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = liu_logistic_mse(mu, gamma, k, x1);
  double f2 = liu_logistic_mse(mu, gamma, k, x2);
  while (b - a > 1e-4) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = liu_logistic_mse(mu, gamma, k, x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = liu_logistic_mse(mu, gamma, k, x2);
    }
  }
  return ShrinkageParams{k, 0.5 * (a + b), SelectionRule::LogisticKp1};
}

}  // namespace morss
