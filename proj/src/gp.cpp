#include "fineprune/gp.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "fineprune/errors.hpp"
#include "fineprune/kernels.hpp"

namespace fp::gp {

namespace ker = fp::kernels;

double kernel(std::span<const double> x, std::span<const double> y, const KernelHyper& hyper) {
    if (x.size() != y.size() || x.size() != hyper.length_scales.size())
        throw ArgumentError("kernel dimension mismatch");
    std::vector<double> inv_ls2(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        inv_ls2[i] = 1.0 / (hyper.length_scales[i] * hyper.length_scales[i]);
    double d2 = ker::weighted_sqdist(x.data(), y.data(), inv_ls2.data(), x.size());
    return hyper.signal_var * std::exp(-0.5 * d2);
}

namespace {

// In-place Cholesky of an n x n row-major matrix; returns false on a
// non-positive pivot.
bool cholesky(std::vector<double>& a, std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) {
        double d = a[j * n + j] - ker::dot(a.data() + j * n, a.data() + j * n, j);
        if (!(d > 0.0)) return false;
        double root = std::sqrt(d);
        a[j * n + j] = root;
        for (std::size_t i = j + 1; i < n; ++i) {
            double v = a[i * n + j] - ker::dot(a.data() + i * n, a.data() + j * n, j);
            a[i * n + j] = v / root;
        }
    }
    // zero the strict upper triangle for cleanliness
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) a[i * n + j] = 0.0;
    return true;
}

void solve_lower(const std::vector<double>& l, std::size_t n, std::vector<double>& b) {
    for (std::size_t i = 0; i < n; ++i) {
        double v = b[i] - ker::dot(l.data() + i * n, b.data(), i);
        b[i] = v / l[i * n + i];
    }
}

void solve_upper_from_lower(const std::vector<double>& l, std::size_t n,
                            std::vector<double>& b) {
    // solves L^T x = b
    for (std::size_t i = n; i-- > 0;) {
        double v = b[i];
        for (std::size_t j = i + 1; j < n; ++j) v -= l[j * n + i] * b[j];
        b[i] = v / l[i * n + i];
    }
}

}  // namespace

GPModel GPModel::fit(std::vector<std::vector<double>> X, std::vector<double> y,
                     KernelHyper hyper) {
    if (X.size() != y.size()) throw ArgumentError("fit: rows(X) != len(y)");
    for (const auto& row : X) {
        if (!X.empty() && row.size() != X.front().size())
            throw ArgumentError("fit: ragged X");
        for (double v : row)
            if (!std::isfinite(v)) throw NumericError("fit: non-finite input point");
    }
    for (double v : y)
        if (!std::isfinite(v)) throw NumericError("fit: non-finite observation");

    GPModel model;
    model.dim_ = hyper.length_scales.size();
    if (!X.empty() && X.front().size() != model.dim_)
        throw ArgumentError("fit: X dimension does not match hyperparameters");
    for (double ls : hyper.length_scales)
        if (!(ls > 0.0)) throw ArgumentError("fit: length scales must be > 0");
    if (!(hyper.signal_var > 0.0)) throw ArgumentError("fit: signal variance must be > 0");
    if (hyper.noise_var < 0.0) throw ArgumentError("fit: noise variance must be >= 0");

    // Collapse duplicate rows by averaging their observations, keeping
    // first-occurrence order. Re-proposed points would otherwise make K
    // singular.
    std::vector<std::vector<double>> ux;
    std::vector<double> uy, counts;
    for (std::size_t i = 0; i < X.size(); ++i) {
        bool merged = false;
        for (std::size_t j = 0; j < ux.size(); ++j) {
            if (ux[j] == X[i]) {
                uy[j] += y[i];
                counts[j] += 1.0;
                merged = true;
                break;
            }
        }
        if (!merged) {
            ux.push_back(std::move(X[i]));
            uy.push_back(y[i]);
            counts.push_back(1.0);
        }
    }
    for (std::size_t j = 0; j < uy.size(); ++j) uy[j] /= counts[j];

    std::size_t n = ux.size();
    model.n_ = n;
    model.hyper_ = std::move(hyper);
    model.hyper_.noise_var = std::max(model.hyper_.noise_var, kJitterFloor);
    model.X_.resize(n * model.dim_);
    for (std::size_t i = 0; i < n; ++i)
        std::copy(ux[i].begin(), ux[i].end(), model.X_.begin() + i * model.dim_);
    model.y_ = std::move(uy);
    model.mu0_ = 0.0;
    if (n > 0) model.mu0_ = ker::sum(model.y_.data(), n) / static_cast<double>(n);
    if (n == 0) return model;

    std::vector<double> inv_ls2(model.dim_);
    for (std::size_t i = 0; i < model.dim_; ++i)
        inv_ls2[i] = 1.0 / (model.hyper_.length_scales[i] * model.hyper_.length_scales[i]);

    std::vector<double> base(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double d2 = ker::weighted_sqdist(model.X_.data() + i * model.dim_,
                                             model.X_.data() + j * model.dim_, inv_ls2.data(),
                                             model.dim_);
            double k = model.hyper_.signal_var * std::exp(-0.5 * d2);
            base[i * n + j] = k;
            base[j * n + i] = k;
        }
    }

    // Jitter escalates x10 per failed factorization up to the ceiling.
    double jitter = model.hyper_.noise_var;
    for (;;) {
        model.chol_ = base;
        for (std::size_t i = 0; i < n; ++i) model.chol_[i * n + i] += jitter;
        if (cholesky(model.chol_, n)) break;
        if (jitter >= kJitterCeiling)
            throw ConditioningError("kernel matrix not positive definite at jitter ceiling");
        jitter = std::min(std::max(jitter * 10.0, kJitterFloor * 10.0), kJitterCeiling);
    }
    model.hyper_.noise_var = jitter;

    model.alpha_.resize(n);
    for (std::size_t i = 0; i < n; ++i) model.alpha_[i] = model.y_[i] - model.mu0_;
    solve_lower(model.chol_, n, model.alpha_);
    double quad = ker::dot(model.alpha_.data(), model.alpha_.data(), n);
    double logdet = 0.0;
    for (std::size_t i = 0; i < n; ++i) logdet += std::log(model.chol_[i * n + i]);
    model.lml_ = -0.5 * quad - logdet -
                 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
    solve_upper_from_lower(model.chol_, n, model.alpha_);
    return model;
}

GPModel GPModel::fit_auto(std::vector<std::vector<double>> X, std::vector<double> y,
                          std::size_t dim) {
    static constexpr double kLengthGrid[] = {0.1, 0.2, 0.5, 1.0, 2.0};
    static constexpr double kSignalGrid[] = {0.25, 1.0, 4.0};
    static constexpr double kNoiseGrid[] = {1e-6, 1e-4, 1e-2};

    bool have_best = false;
    GPModel best;
    for (double ls : kLengthGrid) {
        for (double sf : kSignalGrid) {
            for (double sn : kNoiseGrid) {
                KernelHyper h;
                h.signal_var = sf;
                h.noise_var = sn;
                h.length_scales.assign(dim, ls);
                GPModel candidate;
                try {
                    candidate = fit(X, y, std::move(h));
                } catch (const ConditioningError&) {
                    continue;
                }
                if (candidate.size() == 0) return candidate;  // empty data: any hyper
                if (!have_best || candidate.lml_ > best.lml_) {
                    best = std::move(candidate);
                    have_best = true;
                }
            }
        }
    }
    if (!have_best) throw ConditioningError("no hyperparameter setting factorized");
    return best;
}

std::pair<double, double> GPModel::posterior(std::span<const double> x) const {
    if (x.size() != dim_) throw ArgumentError("posterior: dimension mismatch");
    double prior_var = hyper_.signal_var;
    if (n_ == 0) return {mu0_, prior_var};

    std::vector<double> inv_ls2(dim_);
    for (std::size_t i = 0; i < dim_; ++i)
        inv_ls2[i] = 1.0 / (hyper_.length_scales[i] * hyper_.length_scales[i]);
    std::vector<double> kvec(n_);
    for (std::size_t i = 0; i < n_; ++i) {
        double d2 = ker::weighted_sqdist(x.data(), X_.data() + i * dim_, inv_ls2.data(), dim_);
        kvec[i] = hyper_.signal_var * std::exp(-0.5 * d2);
    }
    double mean = mu0_ + ker::dot(kvec.data(), alpha_.data(), n_);
    solve_lower(chol_, n_, kvec);
    double var = prior_var - ker::dot(kvec.data(), kvec.data(), n_);
    if (var < 0.0) var = 0.0;
    return {mean, var};
}

}  // namespace fp::gp
