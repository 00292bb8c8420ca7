#include "fineprune/bo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>

#include "fineprune/errors.hpp"
#include "fineprune/rng.hpp"

namespace fp::bo {
namespace {

// Below this posterior deviation the improvement integral collapses to its
// deterministic limit.
constexpr double kDegenerateSigma = 1e-12;

double normal_pdf(double z) {
    return std::exp(-0.5 * z * z) * (std::numbers::inv_sqrtpi / std::numbers::sqrt2);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Rotated Halton pool for one round. The rotation is drawn once per round so
// every proposal step within the round scores the same deterministic pool.
std::vector<std::vector<double>> halton_pool(const BOSettings& settings, std::size_t dim,
                                             int round) {
    if (dim == 0) throw ArgumentError("candidate pool dimension must be positive");
    if (dim > std::size(kHaltonPrimes))
        throw ArgumentError("candidate pool supports at most " +
                            std::to_string(std::size(kHaltonPrimes)) + " dimensions");
    if (settings.pool_size == 0) throw ArgumentError("candidate pool must not be empty");
    Rng rot_rng(derive(settings.seed, {kStreamPool, static_cast<std::uint64_t>(round)}));
    std::vector<double> rotation(dim);
    for (double& r : rotation) r = rot_rng.uniform();
    std::vector<std::vector<double>> pool(settings.pool_size);
    std::vector<double> point;
    for (std::size_t i = 0; i < settings.pool_size; ++i) {
        halton_point(i + 1, rotation, point);
        pool[i] = point;
    }
    return pool;
}

}  // namespace

double expected_improvement(double mu, double sigma, double l_best) {
    if (sigma < 0.0) throw ArgumentError("posterior deviation must be non-negative");
    if (sigma <= kDegenerateSigma) return std::max(0.0, l_best - mu);
    const double z = (l_best - mu) / sigma;
    return sigma * (z * normal_cdf(z) + normal_pdf(z));
}

double expected_improvement(const gp::GPModel& model, std::span<const double> x, double l_best) {
    if (model.size() == 0) throw StateError("expected improvement requires a fitted model");
    if (x.size() != model.dim()) throw ShapeError("query dimension does not match the model");
    const auto [mu, var] = model.posterior(x);
    return expected_improvement(mu, std::sqrt(var), l_best);
}

std::vector<double> propose_candidate(const gp::GPModel& model, const BOSettings& settings,
                                      std::size_t dim, int round, std::size_t step,
                                      const std::vector<double>* incumbent, double l_best) {
    auto pool = halton_pool(settings, dim, round);
    if (model.size() == 0) {
        // Nothing observed yet: walk the pool in order so repeated calls
        // still yield distinct points.
        return pool[std::min(step, pool.size() - 1)];
    }
    if (model.dim() != dim) throw ShapeError("proposal dimension does not match the model");
    if (incumbent != nullptr) {
        if (incumbent->size() != dim) throw ShapeError("incumbent dimension mismatch");
        Rng perturb(derive(settings.seed, {kStreamPerturb, static_cast<std::uint64_t>(round),
                                           static_cast<std::uint64_t>(step)}));
        for (std::size_t p = 0; p < settings.incumbent_perturbations; ++p) {
            std::vector<double> cand(dim);
            for (std::size_t j = 0; j < dim; ++j)
                cand[j] = std::clamp((*incumbent)[j] + settings.perturb_sigma * perturb.normal(),
                                     0.0, 1.0);
            pool.push_back(std::move(cand));
        }
    }
    std::size_t best_idx = 0;
    double best_ei = -1.0;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const double ei = expected_improvement(model, pool[i], l_best);
        if (ei > best_ei) {  // strict comparison keeps the lowest index on ties
            best_ei = ei;
            best_idx = i;
        }
    }
    return pool[best_idx];
}

EvalRecord evaluate_point(const Objective& objective, std::vector<double> x, int round,
                          int eval_idx, const RecordSink& sink) {
    EvalRecord rec;
    try {
        rec = objective(x, eval_idx);
    } catch (const std::exception&) {
        rec = EvalRecord{};
        rec.eps = std::numeric_limits<double>::quiet_NaN();
        rec.s = std::numeric_limits<double>::quiet_NaN();
        rec.l = std::numeric_limits<double>::infinity();
        rec.failed = true;
    }
    rec.x = std::move(x);
    rec.round = round;
    rec.eval_idx = eval_idx;
    if (sink) sink(rec);
    return rec;
}

RoundOutcome bo_round(const Objective& objective, std::size_t dim, const BOSettings& settings,
                      std::vector<EvalRecord> warm_start, int round_index,
                      const RecordSink& sink) {
    if (settings.budget == 0) throw ArgumentError("evaluation budget must be >= 1");
    if (dim == 0) throw ArgumentError("search dimension must be positive");

    RoundOutcome out;
    out.history = std::move(warm_start);
    if (out.history.size() > settings.budget)
        throw ArgumentError("warm start exceeds the evaluation budget");
    for (const auto& rec : out.history)
        if (!rec.failed && rec.x.size() != dim)
            throw ShapeError("warm-start record dimension mismatch");

    auto fit_model = [&](const std::vector<EvalRecord>& history) {
        std::vector<std::vector<double>> X;
        std::vector<double> y;
        for (const auto& rec : history) {
            if (rec.failed) continue;
            X.push_back(rec.x);
            y.push_back(rec.l);
        }
        return gp::GPModel::fit_auto(std::move(X), std::move(y), dim);
    };

    auto best_of = [](const std::vector<EvalRecord>& history) -> const EvalRecord* {
        const EvalRecord* best = nullptr;
        for (const auto& rec : history)
            if (!rec.failed && (best == nullptr || rec.l < best->l)) best = &rec;
        return best;
    };

    gp::GPModel model = fit_model(out.history);
    std::size_t stale = 0;
    for (std::size_t step = 0; out.history.size() < settings.budget; ++step) {
        const EvalRecord* best = best_of(out.history);
        const double l_best = best != nullptr ? best->l : std::numeric_limits<double>::infinity();
        const std::vector<double>* incumbent = best != nullptr ? &best->x : nullptr;
        std::vector<double> x =
            propose_candidate(model, settings, dim, round_index, step, incumbent, l_best);

        EvalRecord rec = evaluate_point(objective, std::move(x), round_index,
                                        static_cast<int>(out.history.size()), sink);
        const bool failed = rec.failed;
        const bool improved = !failed && rec.l < l_best - settings.ei_tol;
        out.history.push_back(std::move(rec));
        if (!failed) model = fit_model(out.history);
        stale = improved ? 0 : stale + 1;
        if (stale >= settings.patience) break;
    }

    if (const EvalRecord* best = best_of(out.history); best != nullptr) out.best = *best;
    return out;
}

}  // namespace fp::bo
