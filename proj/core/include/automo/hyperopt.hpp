#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace automo {

// One evaluated configuration of the (mutation probability, lambda) plane.
struct HyperPoint {
  double mp = 0.0;
  double lambda = 0.0;
  double objective = 0.0;
};

struct BayesBounds {
  double mp_lo = 0.0;
  double mp_hi = 1.0;
  double lambda_lo = 0.0;
  double lambda_hi = 1.0;
};

// Gaussian process posterior over observed points. Kernel hyperparameters are
// fixed and apply to standardized observations: the fit centers on the running
// observation mean and scales by the observation spread, so the acquisition
// balance is insensitive to the objective's absolute units.
class Surrogate {
 public:
  Surrogate(double length_scale = 0.2, double signal_var = 1.0,
            double noise_var = 1e-4);

  void add(double mp, double lambda, double objective);
  std::size_t size() const { return points_.size(); }

  // Posterior mean and variance at (mp, lambda). Variance is clamped to be
  // non-negative; far from every observation it approaches signal times the
  // observation variance. With no observations the prior (0, signal) is
  // returned.
  void predict(double mp, double lambda, double& mean, double& var) const;

 private:
  void refit();
  double kernel(double ax, double ay, double bx, double by) const;

  double length_scale_;
  double signal_var_;
  double noise_var_;
  struct Obs {
    double x, y, f;
  };
  std::vector<Obs> points_;
  std::vector<double> chol_;   // lower-triangular Cholesky factor, row-major
  std::vector<double> alpha_;  // K^-1 (f - mean)
  double prior_mean_ = 0.0;
  double scale_ = 1.0;  // observation spread; 1 while degenerate
};

// Expected improvement of a posterior (mean, stddev) over the incumbent best
// when maximizing. Non-positive stddev degrades to max(mean - best, 0).
double expected_improvement(double mean, double stddev, double best);

struct BayesResult {
  HyperPoint best;
  std::vector<HyperPoint> trials;  // in evaluation order
};

using ObjectiveFn = std::function<double(double mp, double lambda)>;

// Sequential model-based optimization: a low-discrepancy warm start followed
// by expected-improvement proposals on a fixed grid. Returns the best
// observed point, never a surrogate extrapolation. Deterministic per seed.
// With random_search the same budget is spent on uniform draws instead, as
// an ablation baseline.
BayesResult bayes_optimize(const ObjectiveFn& objective,
                           const BayesBounds& bounds, int budget,
                           std::uint64_t seed, bool random_search = false);

}  // namespace automo
