#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "fineprune/gp.hpp"
#include "fineprune/surgery.hpp"

namespace fp::bo {

// One objective evaluation. l = eps - lambda*s for pruning objectives;
// failed records carry l = +inf and are excluded from GP fits.
struct EvalRecord {
    surgery::PruningParams params;  // empty for non-pruning objectives
    std::vector<double> x;          // normalized point in [0,1]^d
    double eps = 0.0;
    double s = 0.0;
    double l = 0.0;
    int round = 0;
    int eval_idx = 0;
    double wall_s = 0.0;
    bool failed = false;
};

struct BOSettings {
    std::size_t budget = 50;       // evaluations per round, warm start included
    std::size_t pool_size = 2048;  // quasi-uniform candidate pool
    std::size_t incumbent_perturbations = 32;
    double perturb_sigma = 0.05;
    double ei_tol = 1e-4;
    std::size_t patience = 10;
    std::uint64_t seed = 0;
};

// Closed-form expected improvement under the minimization convention:
// EI = sigma*(Z*Phi(Z) + phi(Z)) with Z = (l_best - mu)/sigma. Degenerate
// posteriors (sigma <= 1e-12) fall back to max(0, l_best - mu).
double expected_improvement(double mu, double sigma, double l_best);

// Same, on the model posterior at x. Throws StateError on an empty model.
double expected_improvement(const gp::GPModel& model, std::span<const double> x, double l_best);

// EI argmax over a rotated Halton pool plus Gaussian perturbations of the
// incumbent (clipped to the cube). Ties break toward the lowest pool index.
// With an empty model the walk falls back to pool order: pool[min(step, M-1)].
std::vector<double> propose_candidate(const gp::GPModel& model, const BOSettings& settings,
                                      std::size_t dim, int round, std::size_t step,
                                      const std::vector<double>* incumbent, double l_best);

// Objective callback: returns a filled record for the given normalized
// point (eps, s, l, params); throws to signal a failed evaluation.
using Objective = std::function<EvalRecord(std::span<const double> x, int eval_idx)>;
using RecordSink = std::function<void(const EvalRecord&)>;

struct RoundOutcome {
    std::optional<EvalRecord> best;
    std::vector<EvalRecord> history;  // warm start + new evaluations, in order
};

// Runs the objective at one point, converting exceptions into a failed
// record (l = +inf, eps/s = NaN), stamps round/eval_idx, and forwards the
// record to the sink.
EvalRecord evaluate_point(const Objective& objective, std::vector<double> x, int round,
                          int eval_idx, const RecordSink& sink);

// One propose/evaluate/refit loop. Warm-start records seed the model and
// count against the budget. Stops at the budget or after `patience`
// consecutive evaluations without improving the best l by more than
// ei_tol. Failed evaluations stay in the history but never enter the GP.
RoundOutcome bo_round(const Objective& objective, std::size_t dim, const BOSettings& settings,
                      std::vector<EvalRecord> warm_start, int round_index,
                      const RecordSink& sink = {});

}  // namespace fp::bo
