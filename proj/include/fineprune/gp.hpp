#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace fp::gp {

// Squared-exponential ARD kernel hyperparameters. noise_var is floored at
// the jitter level when fitting.
struct KernelHyper {
    double signal_var = 1.0;
    std::vector<double> length_scales;  // one per input dimension
    double noise_var = 1e-6;
};

inline constexpr double kJitterFloor = 1e-10;
inline constexpr double kJitterCeiling = 1e-4;

// k(x, x') = signal_var * exp(-1/2 sum_i (x_i - x'_i)^2 / l_i^2)
double kernel(std::span<const double> x, std::span<const double> y, const KernelHyper& hyper);

// Exact GP regression with a constant mean equal to mean(y) and a cached
// Cholesky factor of K + noise*I. Immutable after fit; posterior queries
// are read-only.
class GPModel {
  public:
    // Duplicate rows of X are collapsed by averaging their y values before
    // fitting. Throws NumericError on non-finite inputs and
    // ConditioningError if the factorization fails even at the jitter
    // ceiling.
    static GPModel fit(std::vector<std::vector<double>> X, std::vector<double> y,
                       KernelHyper hyper);

    // Chooses hyperparameters by maximizing log marginal likelihood over a
    // fixed grid: shared length scale in {0.1, 0.2, 0.5, 1, 2},
    // signal_var in {0.25, 1, 4}, noise_var in {1e-6, 1e-4, 1e-2}.
    static GPModel fit_auto(std::vector<std::vector<double>> X, std::vector<double> y,
                            std::size_t dim);

    // Posterior (mean, variance) at a point; variance is clamped at 0 from
    // below. An empty model returns the prior (0, k(x,x)).
    std::pair<double, double> posterior(std::span<const double> x) const;

    std::size_t size() const { return n_; }
    std::size_t dim() const { return dim_; }
    double mean_offset() const { return mu0_; }
    const KernelHyper& hyper() const { return hyper_; }
    double log_marginal_likelihood() const { return lml_; }

  private:
    GPModel() = default;

    std::size_t n_ = 0, dim_ = 0;
    std::vector<double> X_;      // n x d, row-major, deduplicated
    std::vector<double> y_;      // n
    KernelHyper hyper_;
    double mu0_ = 0.0;
    std::vector<double> chol_;   // lower-triangular factor of K + noise*I
    std::vector<double> alpha_;  // (K + noise*I)^-1 (y - mu0)
    double lml_ = 0.0;
};

}  // namespace fp::gp
