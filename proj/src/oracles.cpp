#include "fineprune/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fineprune/bo.hpp"
#include "fineprune/errors.hpp"
#include "fineprune/rng.hpp"

namespace fp::oracles {
namespace {

// Gauss-Jordan inverse with partial pivoting; n stays tiny here.
std::vector<double> invert(std::vector<double> a, std::size_t n) {
    std::vector<double> inv(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) inv[i * n + i] = 1.0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
        if (a[pivot * n + col] == 0.0) throw NumericError("singular matrix in naive inverse");
        if (pivot != col) {
            for (std::size_t j = 0; j < n; ++j) {
                std::swap(a[pivot * n + j], a[col * n + j]);
                std::swap(inv[pivot * n + j], inv[col * n + j]);
            }
        }
        const double d = a[col * n + col];
        for (std::size_t j = 0; j < n; ++j) {
            a[col * n + j] /= d;
            inv[col * n + j] /= d;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a[r * n + col];
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                a[r * n + j] -= f * a[col * n + j];
                inv[r * n + j] -= f * inv[col * n + j];
            }
        }
    }
    return inv;
}

}  // namespace

std::pair<double, double> gp_posterior_naive(const std::vector<std::vector<double>>& X,
                                             const std::vector<double>& y,
                                             const gp::KernelHyper& hyper,
                                             std::span<const double> x) {
    const std::size_t n = X.size();
    if (n == 0) return {0.0, gp::kernel(x, x, hyper)};
    if (y.size() != n) throw ShapeError("X/y length mismatch in naive posterior");

    const double mu0 = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    std::vector<double> K(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            K[i * n + j] = gp::kernel(X[i], X[j], hyper);
            if (i == j) K[i * n + j] += std::max(hyper.noise_var, gp::kJitterFloor);
        }
    const std::vector<double> Kinv = invert(std::move(K), n);

    std::vector<double> kvec(n);
    for (std::size_t i = 0; i < n; ++i) kvec[i] = gp::kernel(X[i], x, hyper);

    double mean = mu0;
    double quad = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double row_y = 0.0, row_k = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            row_y += Kinv[i * n + j] * (y[j] - mu0);
            row_k += Kinv[i * n + j] * kvec[j];
        }
        mean += kvec[i] * row_y;
        quad += kvec[i] * row_k;
    }
    return {mean, std::max(0.0, gp::kernel(x, x, hyper) - quad)};
}

double ei_monte_carlo(double mu, double sigma, double l_best, std::size_t samples,
                      std::uint64_t seed) {
    if (samples == 0) throw ArgumentError("Monte Carlo needs at least one sample");
    Rng rng(seed);
    double total = 0.0;
    for (std::size_t i = 0; i < samples; ++i)
        total += std::max(0.0, l_best - (mu + sigma * rng.normal()));
    return total / static_cast<double>(samples);
}

FdGradients finite_difference_gradients(nnet::MaskedNetwork net, const nnet::Batch& batch,
                                        double h) {
    if (!(h > 0.0)) throw ArgumentError("finite-difference step must be positive");
    FdGradients out;
    out.weights.resize(net.layers.size());
    out.bias.resize(net.layers.size());
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        auto& layer = net.layers[k];
        out.weights[k].resize(layer.weights.size());
        for (std::size_t i = 0; i < layer.weights.size(); ++i) {
            const double saved = layer.weights[i];
            layer.weights[i] = saved + h;
            const double lp = nnet::evaluate_loss(net, batch);
            layer.weights[i] = saved - h;
            const double lm = nnet::evaluate_loss(net, batch);
            layer.weights[i] = saved;
            out.weights[k][i] = (lp - lm) / (2.0 * h);
        }
        out.bias[k].resize(layer.bias.size());
        for (std::size_t i = 0; i < layer.bias.size(); ++i) {
            const double saved = layer.bias[i];
            layer.bias[i] = saved + h;
            const double lp = nnet::evaluate_loss(net, batch);
            layer.bias[i] = saved - h;
            const double lm = nnet::evaluate_loss(net, batch);
            layer.bias[i] = saved;
            out.bias[k][i] = (lp - lm) / (2.0 * h);
        }
    }
    return out;
}

std::pair<double, double> ei_grid_argmax(const gp::GPModel& model, double l_best,
                                         std::size_t points) {
    if (model.dim() != 1) throw ArgumentError("grid scan supports 1-D models only");
    if (points < 2) throw ArgumentError("grid scan needs at least 2 points");
    double best_x = 0.0, best_ei = -1.0;
    for (std::size_t i = 0; i < points; ++i) {
        const double x = static_cast<double>(i) / static_cast<double>(points - 1);
        const double ei = bo::expected_improvement(model, std::span<const double>(&x, 1), l_best);
        if (ei > best_ei) {
            best_ei = ei;
            best_x = x;
        }
    }
    return {best_x, best_ei};
}

bool selftest_gp(std::ostream& out) {
    Rng rng(0xfeedULL);
    double worst = 0.0;
    bool variance_ok = true;
    for (int instance = 0; instance < 50; ++instance) {
        const std::size_t d = 1 + rng.uniform_int(8);
        const std::size_t n = 1 + rng.uniform_int(20);
        std::vector<std::vector<double>> X(n, std::vector<double>(d));
        std::vector<double> y(n);
        for (auto& row : X)
            for (double& v : row) v = rng.uniform();
        for (double& v : y) v = 2.0 * rng.uniform() - 1.0;
        gp::KernelHyper hyper;
        hyper.signal_var = 0.25 + 3.75 * rng.uniform();
        hyper.length_scales.assign(d, 0.0);
        for (double& l : hyper.length_scales) l = 0.1 + 1.9 * rng.uniform();
        hyper.noise_var = 1e-6 + 1e-2 * rng.uniform();

        gp::GPModel model = gp::GPModel::fit(X, y, hyper);
        for (int q = 0; q < 5; ++q) {
            std::vector<double> xq(d);
            for (double& v : xq) v = rng.uniform();
            const auto [m1, v1] = model.posterior(xq);
            const auto [m2, v2] = gp_posterior_naive(X, y, hyper, xq);
            worst = std::max({worst, std::abs(m1 - m2), std::abs(v1 - v2)});
            if (v1 > hyper.signal_var + 1e-8) variance_ok = false;
        }
    }
    const bool ok = worst <= 1e-8 && variance_ok;
    out << (ok ? "[ok]  " : "[FAIL] ")
        << "gp: factorized posterior vs direct inverse, 50 instances, max |diff| = " << worst
        << (variance_ok ? "" : " (variance exceeded prior)") << "\n";
    return ok;
}

bool selftest_ei(std::ostream& out) {
    Rng rng(0xbeefULL);
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
        const double mu = 2.0 * rng.uniform() - 1.0;
        const double sigma = 0.05 + 1.95 * rng.uniform();
        const double l_best = 2.0 * rng.uniform() - 1.0;
        const double closed = bo::expected_improvement(mu, sigma, l_best);
        const double mc = ei_monte_carlo(mu, sigma, l_best, 1000000,
                                         0x5eedULL + static_cast<std::uint64_t>(t));
        worst = std::max(worst, std::abs(closed - mc));
        if (closed < 0.0) worst = 1.0;
    }
    const bool ok = worst <= 3e-3;
    out << (ok ? "[ok]  " : "[FAIL] ")
        << "ei: closed form vs Monte Carlo, 20 triples, max |diff| = " << worst << "\n";
    return ok;
}

bool selftest_gradients(std::ostream& out) {
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const std::vector<nnet::LayerSpec> spec = {
            nnet::LayerSpec::dense(3, 8),
            nnet::LayerSpec::dense(8, 4),
            nnet::LayerSpec::dense(4, 3, nnet::Activation::identity)};
        nnet::MaskedNetwork net = nnet::init_network(spec, seed);
        Rng rng(seed * 977);
        for (auto& layer : net.layers) {
            for (double& m : layer.mask) m = rng.bernoulli(0.3) ? 0.0 : 1.0;
            // Nonzero biases keep pre-activations off the relu kink, where
            // finite differences and the subgradient convention disagree.
            for (double& b : layer.bias) b = 0.5 * (2.0 * rng.uniform() - 1.0);
        }

        nnet::Batch batch;
        batch.rows = 6;
        batch.cols = 3;
        batch.inputs.resize(batch.rows * batch.cols);
        batch.labels.resize(batch.rows);
        for (double& v : batch.inputs) v = 2.0 * rng.uniform() - 1.0;
        for (int& l : batch.labels) l = static_cast<int>(rng.uniform_int(3));

        nnet::Gradients grads;
        nnet::backward(net, batch, grads);
        const auto masked = grads.masked(net);
        const FdGradients fd = finite_difference_gradients(net, batch);
        for (std::size_t k = 0; k < net.layers.size(); ++k) {
            for (std::size_t i = 0; i < masked[k].size(); ++i) {
                const double a = masked[k][i], b = fd.weights[k][i];
                worst = std::max(worst, std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}));
            }
            for (std::size_t i = 0; i < grads.bias[k].size(); ++i) {
                const double a = grads.bias[k][i], b = fd.bias[k][i];
                worst = std::max(worst, std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}));
            }
        }
    }
    const bool ok = worst <= 1e-4;
    out << (ok ? "[ok]  " : "[FAIL] ")
        << "gradients: backprop vs central differences, 10 seeds, max rel err = " << worst
        << "\n";
    return ok;
}

int run_selftest(std::ostream& out) {
    int failures = 0;
    if (!selftest_gp(out)) ++failures;
    if (!selftest_ei(out)) ++failures;
    if (!selftest_gradients(out)) ++failures;
    return failures;
}

}  // namespace fp::oracles
