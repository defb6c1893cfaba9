#include "nvsc/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include <Eigen/Cholesky>

#include "nvsc/errors.hpp"

namespace nvsc {

namespace {

constexpr double kC1 = 1e-4;
constexpr double kC2 = 0.9;
constexpr double kCurvatureEps = 1e-10;
constexpr int kMaxLineSearchEvals = 25;

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

bool finite(double f, const Vector& g) { return std::isfinite(f) && g.allFinite(); }

struct Counted {
  const ObjectiveFn& fn;
  int evals = 0;
  std::pair<double, Vector> operator()(const Vector& x) {
    ++evals;
    return fn(x);
  }
};

struct LinePoint {
  double alpha;
  double f;
  Vector g;
  double slope;  // g . p
};

// Minimiser of the cubic through (a, fa, da) and (b, fb, db), or nullopt.
std::optional<double> cubic_min(double a, double fa, double da, double b, double fb, double db) {
  const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - da * db;
  if (disc < 0) return std::nullopt;
  const double d2 = std::copysign(std::sqrt(disc), b - a);
  const double denom = db - da + 2.0 * d2;
  if (denom == 0) return std::nullopt;
  const double t = b - (b - a) * (db + d2 - d1) / denom;
  if (!std::isfinite(t)) return std::nullopt;
  return t;
}

class WolfeSearch {
 public:
  WolfeSearch(Counted& f, const Vector& x, double f0, const Vector& p, double slope0)
      : f_(f), x_(x), p_(p), f0_(f0), slope0_(slope0) {}

  std::optional<LinePoint> run(double alpha_init) {
    LinePoint prev{0.0, f0_, Vector(), slope0_};
    double alpha = alpha_init;
    for (int i = 0; i < kMaxLineSearchEvals; ++i) {
      LinePoint cur = eval(alpha);
      if (!std::isfinite(cur.f) || !std::isfinite(cur.slope)) return zoom(prev, cur, true);
      if (cur.f > f0_ + kC1 * alpha * slope0_ || (i > 0 && cur.f >= prev.f)) {
        return zoom(prev, cur, false);
      }
      if (std::abs(cur.slope) <= -kC2 * slope0_) return cur;
      if (cur.slope >= 0) return zoom(cur, prev, false);
      prev = std::move(cur);
      alpha *= 2.0;
    }
    return std::nullopt;
  }

 private:
  LinePoint eval(double alpha) {
    auto [fv, gv] = f_(x_ + alpha * p_);
    LinePoint pt{alpha, fv, std::move(gv), 0.0};
    pt.slope = pt.g.allFinite() ? pt.g.dot(p_) : std::numeric_limits<double>::quiet_NaN();
    return pt;
  }

  // `lo` satisfies sufficient decrease and has the lower value; `hi` brackets.
  // When hi_invalid, hi has no usable value and the interval is bisected.
  std::optional<LinePoint> zoom(LinePoint lo, LinePoint hi, bool hi_invalid) {
    while (f_.evals < kMaxLineSearchEvals * 2 + start_evals_) {
      const double a = lo.alpha, b = hi.alpha;
      if (std::abs(b - a) <= 1e-14 * std::max(1.0, std::abs(a))) return std::nullopt;
      double t = 0.5 * (a + b);
      if (!hi_invalid) {
        if (auto c = cubic_min(a, lo.f, lo.slope, b, hi.f, hi.slope)) {
          const double lo_edge = std::min(a, b) + 0.1 * std::abs(b - a);
          const double hi_edge = std::max(a, b) - 0.1 * std::abs(b - a);
          if (*c > lo_edge && *c < hi_edge) t = *c;
        }
      }
      LinePoint cur = eval(t);
      if (!std::isfinite(cur.f) || !std::isfinite(cur.slope)) {
        hi = std::move(cur);
        hi_invalid = true;
        continue;
      }
      if (cur.f > f0_ + kC1 * t * slope0_ || cur.f >= lo.f) {
        hi = std::move(cur);
        hi_invalid = false;
        continue;
      }
      if (std::abs(cur.slope) <= -kC2 * slope0_) return cur;
      if (cur.slope * (hi.alpha - lo.alpha) >= 0) {
        hi = std::move(lo);
        hi_invalid = false;
      }
      lo = std::move(cur);
    }
    return std::nullopt;
  }

  Counted& f_;
  const Vector& x_;
  const Vector& p_;
  double f0_;
  double slope0_;
  int start_evals_ = f_.evals;
};

#ifndef NDEBUG
void check_positive_definite(const Eigen::MatrixXd& h) {
  Eigen::LLT<Eigen::MatrixXd> llt(h);
  if (llt.info() != Eigen::Success) throw NumericalFailure("BFGS inverse Hessian lost definiteness", {}, 0);
}
#endif

}  // namespace

void OptimOptions::validate() const {
  if (!(grad_tol > 0 && param_tol > 0)) throw DomainError("tolerances must be positive");
  if (max_iters < 1) throw DomainError("max_iters must be at least 1");
  if (!(adam_lr0 > 0) || adam_patience < 1 || !(adam_lr_factor > 0 && adam_lr_factor < 1)) {
    throw DomainError("invalid Adam schedule");
  }
}

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::grad_tol: return "grad_tol";
    case StopReason::param_tol: return "param_tol";
    case StopReason::max_iters: return "max_iters";
  }
  return "?";
}

OptimizationResult minimize_bfgs(const ObjectiveFn& fn, const Vector& x0, const OptimOptions& opts) {
  opts.validate();
  Counted f{fn};
  const auto n = x0.size();
  OptimizationResult res;
  res.x = x0;
  auto [fx, gx] = f(x0);
  if (!finite(fx, gx)) throw NumericalFailure("non-finite objective at the starting point", to_std(x0), fx);
  res.loss = fx;
  res.loss_history.push_back(fx);

  auto finish = [&](StopReason why) {
    res.converged_by = why;
    res.function_evals = f.evals;
    return res;
  };
  if (gx.lpNorm<Eigen::Infinity>() < opts.grad_tol) return finish(StopReason::grad_tol);

  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n);
  bool h_is_identity = true;
  bool scaled = false;
  while (res.iterations < opts.max_iters) {
    Vector p = -h * gx;
    double slope = gx.dot(p);
    if (!(slope < 0)) {
      h.setIdentity();
      h_is_identity = true;
      p = -gx;
      slope = gx.dot(p);
    }
    const double alpha0 = h_is_identity && !scaled ? std::min(1.0, 1.0 / gx.norm()) : 1.0;
    WolfeSearch search(f, res.x, res.loss, p, slope);
    std::optional<LinePoint> step = search.run(alpha0);
    if (!step && !h_is_identity) {
      // retry once along steepest descent
      h.setIdentity();
      h_is_identity = true;
      scaled = false;
      p = -gx;
      slope = gx.dot(p);
      WolfeSearch retry(f, res.x, res.loss, p, slope);
      step = retry.run(std::min(1.0, 1.0 / gx.norm()));
    }
    if (!step) return finish(StopReason::param_tol);

    const Vector s = step->alpha * p;
    const Vector y = step->g - gx;
    res.x += s;
    res.loss = step->f;
    gx = step->g;
    ++res.iterations;
    res.loss_history.push_back(res.loss);

    if (gx.lpNorm<Eigen::Infinity>() < opts.grad_tol) return finish(StopReason::grad_tol);
    if (s.lpNorm<Eigen::Infinity>() < opts.param_tol) return finish(StopReason::param_tol);

    const double ys = y.dot(s);
    if (ys > kCurvatureEps) {
      if (!scaled) {
        h = Eigen::MatrixXd::Identity(n, n) * (ys / y.squaredNorm());
        scaled = true;
      }
      const double rho = 1.0 / ys;
      const Eigen::MatrixXd left = Eigen::MatrixXd::Identity(n, n) - rho * s * y.transpose();
      h = left * h * left.transpose() + rho * s * s.transpose();
      h = 0.5 * (h + h.transpose());
      h_is_identity = false;
#ifndef NDEBUG
      check_positive_definite(h);
#endif
    }
  }
  return finish(StopReason::max_iters);
}

OptimizationResult minimize_adam(const ObjectiveFn& fn, const Vector& x0, const OptimOptions& opts) {
  opts.validate();
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  Counted f{fn};
  OptimizationResult res;
  res.x = x0;
  auto [fx, gx] = f(x0);
  if (!finite(fx, gx)) throw NumericalFailure("non-finite objective at the starting point", to_std(x0), fx);
  res.loss = fx;
  res.loss_history.push_back(fx);
  double lr = opts.adam_lr0;
  auto finish = [&](StopReason why) {
    res.converged_by = why;
    res.function_evals = f.evals;
    res.final_learning_rate = lr;
    return res;
  };
  if (gx.lpNorm<Eigen::Infinity>() < opts.grad_tol) return finish(StopReason::grad_tol);

  Vector m = Vector::Zero(x0.size()), v = Vector::Zero(x0.size());
  Vector best_x = x0;
  double best = fx;
  int stall = 0;
  double b1t = 1.0, b2t = 1.0;
  while (res.iterations < opts.max_iters) {
    m = kBeta1 * m + (1 - kBeta1) * gx;
    v = kBeta2 * v + (1 - kBeta2) * gx.cwiseAbs2();
    b1t *= kBeta1;
    b2t *= kBeta2;
    const Vector m_hat = m / (1 - b1t);
    const Vector v_hat = v / (1 - b2t);
    const Vector step = -lr * m_hat.cwiseQuotient((v_hat.cwiseSqrt().array() + kEps).matrix());
    res.x += step;
    ++res.iterations;
    std::tie(fx, gx) = f(res.x);
    if (!finite(fx, gx)) throw NumericalFailure("non-finite objective during Adam", to_std(best_x), best);
    res.loss = fx;
    res.loss_history.push_back(fx);
    if (fx < best) {
      best = fx;
      best_x = res.x;
      stall = 0;
    } else if (++stall >= opts.adam_patience) {
      lr *= opts.adam_lr_factor;
      stall = 0;
    }
    if (gx.lpNorm<Eigen::Infinity>() < opts.grad_tol) return finish(StopReason::grad_tol);
    if (step.lpNorm<Eigen::Infinity>() < opts.param_tol) return finish(StopReason::param_tol);
  }
  return finish(StopReason::max_iters);
}

OptimizationResult minimize_hybrid(const ObjectiveFn& fn, const Vector& x0, const OptimOptions& opts) {
  const OptimizationResult adam = minimize_adam(fn, x0, opts);
  OptimizationResult out = minimize_bfgs(fn, adam.x, opts);
  out.iterations += adam.iterations;
  out.function_evals += adam.function_evals;
  out.final_learning_rate = adam.final_learning_rate;
  std::vector<double> history = adam.loss_history;
  history.insert(history.end(), out.loss_history.begin() + 1, out.loss_history.end());
  out.loss_history = std::move(history);
  return out;
}

Optimizer parse_optimizer(const std::string& name) {
  if (name == "bfgs") return Optimizer::bfgs;
  if (name == "adam") return Optimizer::adam;
  if (name == "hybrid" || name == "adam+bfgs") return Optimizer::hybrid;
  throw DomainError("unknown optimizer: " + name);
}

std::string to_string(Optimizer o) {
  switch (o) {
    case Optimizer::bfgs: return "bfgs";
    case Optimizer::adam: return "adam";
    case Optimizer::hybrid: return "hybrid";
  }
  return "?";
}

OptimizationResult minimize(Optimizer which, const ObjectiveFn& f, const Vector& x0,
                            const OptimOptions& opts) {
  switch (which) {
    case Optimizer::bfgs: return minimize_bfgs(f, x0, opts);
    case Optimizer::adam: return minimize_adam(f, x0, opts);
    case Optimizer::hybrid: return minimize_hybrid(f, x0, opts);
  }
  throw DomainError("unknown optimizer");
}

}  // namespace nvsc
