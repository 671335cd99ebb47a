#include "automo/hyperopt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "automo/rng.hpp"

namespace automo {
namespace {

constexpr double kInvSqrt2 = 0.7071067811865476;
constexpr double kInvSqrt2Pi = 0.3989422804014327;

double normal_cdf(double z) { return 0.5 * std::erfc(-z * kInvSqrt2); }
double normal_pdf(double z) {
  return kInvSqrt2Pi * std::exp(-0.5 * z * z);
}

// Van der Corput radical inverse; index 0 maps to 0 so callers start at 1.
double radical_inverse(std::uint64_t index, std::uint64_t base) {
  double inv_base = 1.0 / static_cast<double>(base);
  double factor = inv_base;
  double result = 0.0;
  while (index > 0) {
    result += static_cast<double>(index % base) * factor;
    index /= base;
    factor *= inv_base;
  }
  return result;
}

double wrap_unit(double x) { return x - std::floor(x); }

[[noreturn]] void throw_at_point(const char* what, double mp, double lambda) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "objective failed at mp=%.6f lambda=%.6f: %s",
                mp, lambda, what);
  throw std::runtime_error(buf);
}

}  // namespace

Surrogate::Surrogate(double length_scale, double signal_var, double noise_var)
    : length_scale_(length_scale),
      signal_var_(signal_var),
      noise_var_(noise_var) {
  if (!(length_scale > 0.0) || !(signal_var > 0.0) || noise_var < 0.0) {
    throw std::invalid_argument("surrogate hyperparameters out of range");
  }
}

double Surrogate::kernel(double ax, double ay, double bx, double by) const {
  const double dx = ax - bx;
  const double dy = ay - by;
  const double d2 = dx * dx + dy * dy;
  return signal_var_ * std::exp(-0.5 * d2 / (length_scale_ * length_scale_));
}

void Surrogate::add(double mp, double lambda, double objective) {
  if (!std::isfinite(objective)) {
    throw std::invalid_argument("non-finite objective observation");
  }
  points_.push_back({mp, lambda, objective});
  refit();
}

void Surrogate::refit() {
  const std::size_t n = points_.size();
  prior_mean_ = 0.0;
  for (const Obs& o : points_) prior_mean_ += o.f;
  prior_mean_ /= static_cast<double>(n);

  // standardize: the fixed kernel hyperparameters describe observations in
  // units of their own spread, so EI keeps the same explore/exploit balance
  // whatever the objective's magnitude
  double var_obs = 0.0;
  for (const Obs& o : points_) {
    var_obs += (o.f - prior_mean_) * (o.f - prior_mean_);
  }
  var_obs /= static_cast<double>(n);
  scale_ = var_obs > 0.0 ? std::sqrt(var_obs) : 1.0;

  std::vector<double> k(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double v = kernel(points_[i].x, points_[i].y, points_[j].x, points_[j].y);
      k[i * n + j] = v;
      k[j * n + i] = v;
    }
  }

  // Cholesky with an escalating jitter ladder; the kernel matrix of near
  // duplicate points is only semi-definite in exact arithmetic.
  double jitter = noise_var_;
  for (int attempt = 0; attempt < 8; ++attempt) {
    chol_.assign(k.begin(), k.end());
    for (std::size_t i = 0; i < n; ++i) chol_[i * n + i] += jitter;
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        double sum = chol_[i * n + j];
        for (std::size_t p = 0; p < j; ++p) {
          sum -= chol_[i * n + p] * chol_[j * n + p];
        }
        if (i == j) {
          if (sum <= 0.0) {
            ok = false;
            break;
          }
          chol_[i * n + i] = std::sqrt(sum);
        } else {
          chol_[i * n + j] = sum / chol_[j * n + j];
        }
      }
    }
    if (ok) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) chol_[i * n + j] = 0.0;
      }
      alpha_.assign(n, 0.0);
      // Solve L y = f - mean, then L^T alpha = y.
      for (std::size_t i = 0; i < n; ++i) {
        double sum = points_[i].f - prior_mean_;
        for (std::size_t p = 0; p < i; ++p) sum -= chol_[i * n + p] * alpha_[p];
        alpha_[i] = sum / chol_[i * n + i];
      }
      for (std::size_t ii = n; ii-- > 0;) {
        double sum = alpha_[ii];
        for (std::size_t p = ii + 1; p < n; ++p) {
          sum -= chol_[p * n + ii] * alpha_[p];
        }
        alpha_[ii] = sum / chol_[ii * n + ii];
      }
      return;
    }
    jitter = (jitter == 0.0) ? 1e-12 : jitter * 10.0;
  }
  throw std::runtime_error("surrogate kernel matrix not positive definite");
}

void Surrogate::predict(double mp, double lambda, double& mean,
                        double& var) const {
  const std::size_t n = points_.size();
  if (n == 0) {
    mean = 0.0;
    var = signal_var_;
    return;
  }
  std::vector<double> ks(n);
  for (std::size_t i = 0; i < n; ++i) {
    ks[i] = kernel(mp, lambda, points_[i].x, points_[i].y);
  }
  mean = prior_mean_;
  for (std::size_t i = 0; i < n; ++i) mean += ks[i] * alpha_[i];

  // v = L^-1 k*; posterior variance = k** - v.v
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = ks[i];
    for (std::size_t p = 0; p < i; ++p) sum -= chol_[i * n + p] * v[p];
    v[i] = sum / chol_[i * n + i];
  }
  double reduction = 0.0;
  for (std::size_t i = 0; i < n; ++i) reduction += v[i] * v[i];
  // back to raw units: standardized residuals carry a scale^2 factor
  var = scale_ * scale_ * std::max(0.0, signal_var_ - reduction);
}

double expected_improvement(double mean, double stddev, double best) {
  if (!(stddev > 0.0)) return std::max(mean - best, 0.0);
  const double z = (mean - best) / stddev;
  const double ei = (mean - best) * normal_cdf(z) + stddev * normal_pdf(z);
  return std::max(ei, 0.0);
}

BayesResult bayes_optimize(const ObjectiveFn& objective,
                           const BayesBounds& bounds, int budget,
                           std::uint64_t seed, bool random_search) {
  if (budget < 1) throw std::invalid_argument("budget must be at least 1");
  if (!(bounds.mp_lo <= bounds.mp_hi) ||
      !(bounds.lambda_lo <= bounds.lambda_hi)) {
    throw std::invalid_argument("invalid bounds");
  }

  BayesResult result;
  Surrogate surrogate;
  auto span_mp = bounds.mp_hi - bounds.mp_lo;
  auto span_la = bounds.lambda_hi - bounds.lambda_lo;

  auto evaluate = [&](double mp, double lambda) {
    double f;
    try {
      f = objective(mp, lambda);
    } catch (const std::exception& e) {
      throw_at_point(e.what(), mp, lambda);
    }
    if (!std::isfinite(f)) throw_at_point("non-finite objective", mp, lambda);
    result.trials.push_back({mp, lambda, f});
    if (result.trials.size() == 1 || f > result.best.objective) {
      result.best = result.trials.back();
    }
    surrogate.add(mp, lambda, f);
  };

  Rng rng(derive_seed(seed, stream::kTune));

  if (random_search) {
    for (int t = 0; t < budget; ++t) {
      evaluate(bounds.mp_lo + span_mp * rng.uniform01(),
               bounds.lambda_lo + span_la * rng.uniform01());
    }
    return result;
  }

  // Halton(2,3) warm start under a per-seed toroidal shift, so trajectories
  // differ across seeds while keeping low-discrepancy coverage.
  const double shift_x = rng.uniform01();
  const double shift_y = rng.uniform01();
  const int init_count = std::min(budget, 5);
  for (int i = 0; i < init_count; ++i) {
    const double ux = wrap_unit(radical_inverse(i + 1, 2) + shift_x);
    const double uy = wrap_unit(radical_inverse(i + 1, 3) + shift_y);
    evaluate(bounds.mp_lo + span_mp * ux, bounds.lambda_lo + span_la * uy);
  }

  constexpr int kGrid = 64;
  for (int t = init_count; t < budget; ++t) {
    double best_ei = -1.0;
    double best_mp = bounds.mp_lo;
    double best_la = bounds.lambda_lo;
    for (int i = 0; i < kGrid; ++i) {
      const double mp =
          bounds.mp_lo + span_mp * ((i + 0.5) / static_cast<double>(kGrid));
      for (int j = 0; j < kGrid; ++j) {
        const double la = bounds.lambda_lo +
                          span_la * ((j + 0.5) / static_cast<double>(kGrid));
        double mean, var;
        surrogate.predict(mp, la, mean, var);
        const double ei =
            expected_improvement(mean, std::sqrt(var), result.best.objective);
        if (ei > best_ei) {
          best_ei = ei;
          best_mp = mp;
          best_la = la;
        }
      }
    }
    evaluate(best_mp, best_la);
  }
  return result;
}

}  // namespace automo
