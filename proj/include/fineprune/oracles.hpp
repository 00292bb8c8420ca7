#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "fineprune/gp.hpp"
#include "fineprune/nnet.hpp"

namespace fp::oracles {

// Reference posterior via explicit matrix inversion (Gauss-Jordan with
// partial pivoting) instead of the Cholesky path. Slow; for verification.
std::pair<double, double> gp_posterior_naive(const std::vector<std::vector<double>>& X,
                                             const std::vector<double>& y,
                                             const gp::KernelHyper& hyper,
                                             std::span<const double> x);

// Monte Carlo estimate of E[max(0, l_best - (mu + sigma*g))], g ~ N(0,1).
double ei_monte_carlo(double mu, double sigma, double l_best, std::size_t samples,
                      std::uint64_t seed);

// Loss gradients w.r.t. stored weights and biases by central differences.
struct FdGradients {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> bias;
};
FdGradients finite_difference_gradients(nnet::MaskedNetwork net, const nnet::Batch& batch,
                                        double h = 1e-5);

// Dense scan of expected improvement over [0,1] for 1-D models; returns
// (argmax, max). Ties keep the lowest grid index.
std::pair<double, double> ei_grid_argmax(const gp::GPModel& model, double l_best,
                                         std::size_t points);

// Independent-reference suites: each prints one status line per check and
// returns true when every check passed.
bool selftest_gp(std::ostream& out);
bool selftest_ei(std::ostream& out);
bool selftest_gradients(std::ostream& out);

// Runs all suites; returns the number of failed suites.
int run_selftest(std::ostream& out);

}  // namespace fp::oracles
