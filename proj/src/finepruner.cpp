#include "fineprune/finepruner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <utility>

#include "fineprune/errors.hpp"

namespace fp::finepruner {
namespace {

// Restores the persistent network even when an evaluation throws.
struct RestoreGuard {
    nnet::MaskedNetwork& net;
    const nnet::NetworkState& snap;
    ~RestoreGuard() { nnet::restore(net, snap); }
};

std::string layer_label(const nnet::LayerSpec& spec) {
    if (spec.kind == nnet::LayerKind::dense)
        return "dense " + std::to_string(spec.in_dim) + "x" + std::to_string(spec.out_dim);
    return "conv " + std::to_string(spec.in_channels) + "x" + std::to_string(spec.out_channels) +
           " k" + std::to_string(spec.kernel_size);
}

RoundResult measure_round(int round, surgery::PruningParams params,
                          const nnet::MaskedNetwork& net, const SplitBatches& data,
                          double lambda) {
    RoundResult r;
    r.round = round;
    r.params = std::move(params);
    r.eps_val = nnet::top1_error(net, data.validation);
    r.eps_test = nnet::top1_error(net, data.test);
    r.s = surgery::sparsity(net);
    r.l = r.eps_val - lambda * r.s;
    const std::size_t nonzero = net.nonzero_weight_count();
    r.compression = static_cast<double>(net.weight_count()) /
                    static_cast<double>(std::max<std::size_t>(std::size_t{1}, nonzero));
    r.remaining_params = nonzero + net.bias_count();
    r.layer_sparsity.reserve(net.layers.size());
    for (const auto& layer : net.layers)
        r.layer_sparsity.push_back(surgery::layer_sparsity(layer));
    return r;
}

void finalize_report(RunReport& report, const nnet::MaskedNetwork& net) {
    report.total_weights = net.weight_count();
    report.total_biases = net.bias_count();
    report.remaining_weights = net.nonzero_weight_count();
    report.compression =
        static_cast<double>(report.total_weights) /
        static_cast<double>(std::max<std::size_t>(std::size_t{1}, report.remaining_weights));
    report.layers.clear();
    for (const auto& layer : net.layers) {
        LayerReport lr;
        lr.name = layer_label(layer.spec);
        lr.weights_total = layer.spec.weight_count();
        lr.bias_count = layer.spec.bias_count();
        lr.weights_nonzero = 0;
        for (double m : layer.mask)
            if (m != 0.0) ++lr.weights_nonzero;
        lr.sparsity = surgery::layer_sparsity(layer);
        report.layers.push_back(std::move(lr));
    }
    if (!report.rounds.empty()) {
        report.final_val_acc = 1.0 - report.rounds.back().eps_val;
        report.final_test_acc = 1.0 - report.rounds.back().eps_test;
    }
}

// The outer apply must actually prune, so the Bernoulli gate is forced open
// (p0=1, no cooling); the thresholds are the candidate's own.
void apply_params(nnet::MaskedNetwork& net, const surgery::PruningParams& params, Rng& rng) {
    surgery::PruningParams forced = params;
    forced.p0 = 1.0;
    forced.kappa = 0.0;
    surgery::update_masks(net, forced, 0, rng);
}

bo::Objective make_objective(const EvalContext& ctx, const FinePruneConfig& cfg,
                             std::size_t n_layers) {
    return [&ctx, &cfg, n_layers](std::span<const double> x, int eval_idx) -> bo::EvalRecord {
        surgery::PruningParams params = surgery::denormalize(x, n_layers, cfg.bounds);
        const auto t0 = std::chrono::steady_clock::now();
        ObjectiveValue v = evaluate_objective(params, ctx, eval_idx);
        bo::EvalRecord rec;
        rec.params = std::move(params);
        rec.eps = v.eps;
        rec.s = v.s;
        rec.l = v.l;
        if (cfg.log_timings)
            rec.wall_s =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return rec;
    };
}

struct PruneRoundResult {
    double best_l = 0.0;
    std::vector<double> best_x;
};

// One outer pruning round: warm start (random when `incumbent` is null,
// otherwise the re-scored incumbent), one optimization round, permanent
// mask apply, fine-tune, and the round measurement. Throws on failure.
PruneRoundResult prune_round(RunReport& report, const FinePruneConfig& cfg,
                             nnet::MaskedNetwork& net, const SplitBatches& data,
                             const bo::BOSettings& settings, int round,
                             const std::vector<double>* incumbent, const bo::RecordSink& sink) {
    const std::size_t n_layers = net.layers.size();
    const std::size_t dim = 2 * n_layers + 2;
    const nnet::NetworkState snap = nnet::snapshot(net);
    EvalContext ctx{net, snap, data.train, data.validation, cfg, round};
    bo::Objective objective = make_objective(ctx, cfg, n_layers);

    std::vector<bo::EvalRecord> warm;
    if (incumbent == nullptr) {
        Rng wrng(derive(cfg.seed, {kStreamWarm}));
        for (std::size_t i = 0; i < cfg.n_init; ++i) {
            std::vector<double> x(dim);
            for (double& c : x) c = wrng.uniform();
            warm.push_back(
                bo::evaluate_point(objective, std::move(x), round, static_cast<int>(i), sink));
        }
    } else if (!incumbent->empty()) {
        warm.push_back(bo::evaluate_point(objective, *incumbent, round, 0, sink));
    }

    bo::RoundOutcome outcome = bo::bo_round(objective, dim, settings, std::move(warm), round, sink);
    report.evals.insert(report.evals.end(), outcome.history.begin(), outcome.history.end());
    if (!outcome.best)
        throw NumericError("every candidate evaluation failed in round " + std::to_string(round));

    Rng apply_rng(derive(cfg.seed, {kStreamApply, static_cast<std::uint64_t>(round)}));
    apply_params(net, outcome.best->params, apply_rng);
    Rng ft_rng(derive(cfg.seed, {kStreamFt, static_cast<std::uint64_t>(round)}));
    fine_tune(net, data.train, cfg.lr, cfg.ft_epochs, cfg.batch_size, ft_rng);

    report.rounds.push_back(measure_round(round, outcome.best->params, net, data, cfg.lambda));
    return PruneRoundResult{outcome.best->l, outcome.best->x};
}

// Initial fine-tune plus the round-0 measurement. Returns false when the
// fine-tune failed numerically (report flagged incomplete).
bool initial_phase(RunReport& report, const FinePruneConfig& cfg, nnet::MaskedNetwork& net,
                   const SplitBatches& data) {
    try {
        if (cfg.init_epochs > 0) {
            Rng rng(derive(cfg.seed, {kStreamInitFt}));
            fine_tune(net, data.train, cfg.lr, cfg.init_epochs, cfg.batch_size, rng);
        }
        report.rounds.push_back(measure_round(0, {}, net, data, cfg.lambda));
        return true;
    } catch (const std::exception& e) {
        report.incomplete = true;
        report.error = e.what();
        return false;
    }
}

// Fine-tune rounds until the validation error stops moving (or max_rounds).
// Appends one RoundResult per round; returns the last round index, or -1 on
// failure.
int finetune_phase(RunReport& report, const FinePruneConfig& cfg, nnet::MaskedNetwork& net,
                   const SplitBatches& data) {
    if (!initial_phase(report, cfg, net, data)) return -1;
    int last = 0;
    double prev_eps = report.rounds.back().eps_val;
    for (int round = 1; round <= cfg.max_rounds; ++round) {
        try {
            Rng ft_rng(derive(cfg.seed, {kStreamFt, static_cast<std::uint64_t>(round)}));
            fine_tune(net, data.train, cfg.lr, cfg.ft_epochs, cfg.batch_size, ft_rng);
            report.rounds.push_back(measure_round(round, {}, net, data, cfg.lambda));
            last = round;
            const double eps = report.rounds.back().eps_val;
            const bool converged = std::abs(eps - prev_eps) < cfg.outer_l_tol;
            prev_eps = eps;
            if (converged) break;
        } catch (const std::exception& e) {
            report.incomplete = true;
            report.error = e.what();
            return -1;
        }
    }
    return last;
}

}  // namespace

RunMode parse_mode(const std::string& name) {
    if (name == "finetune_only") return RunMode::finetune_only;
    if (name == "independent") return RunMode::independent;
    if (name == "fineprune") return RunMode::fineprune;
    throw ConfigError("unknown mode '" + name +
                      "'; expected fineprune, finetune_only, or independent");
}

std::string mode_name(RunMode mode) {
    switch (mode) {
        case RunMode::finetune_only: return "finetune_only";
        case RunMode::independent: return "independent";
        case RunMode::fineprune: return "fineprune";
    }
    return "fineprune";
}

void FinePruneConfig::validate() const {
    if (!std::isfinite(lambda) || lambda < 0.0)
        throw ConfigError("prune.lambda must be a finite value >= 0");
    if (max_rounds < 1) throw ConfigError("run.max_rounds must be >= 1");
    if (!std::isfinite(lr) || lr <= 0.0) throw ConfigError("train.lr must be positive");
    if (init_epochs < 0) throw ConfigError("train.init_epochs must be >= 0");
    if (ft_epochs < 1) throw ConfigError("train.ft_epochs must be >= 1");
    if (eval_epochs < 0) throw ConfigError("train.eval_epochs must be >= 0");
    if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("prune.tau must lie in [0,1]");
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (bo.budget < 1) throw ConfigError("bo.budget must be >= 1");
    if (n_init > bo.budget) throw ConfigError("bo.n_init must not exceed bo.budget");
    if (bo.pool_size < 1) throw ConfigError("bo.pool_size must be >= 1");
    if (bo.patience < 1) throw ConfigError("bo.patience must be >= 1");
    if (!(bo.ei_tol >= 0.0)) throw ConfigError("bo.ei_tol must be >= 0");
    if (!(bo.perturb_sigma >= 0.0)) throw ConfigError("bo.perturb_sigma must be >= 0");
    if (!(outer_l_tol >= 0.0)) throw ConfigError("run.l_tol must be >= 0");
    if (!(outer_s_tol >= 0.0)) throw ConfigError("run.s_tol must be >= 0");
    if (!(bounds.a_max >= 0.0)) throw ConfigError("prune.a_max must be >= 0");
    if (!(bounds.m_max >= 0.0)) throw ConfigError("prune.m_max must be >= 0");
    if (!(bounds.p0_min > 0.0 && bounds.p0_min <= bounds.p0_max && bounds.p0_max <= 1.0))
        throw ConfigError("prune.p0 bounds must satisfy 0 < p0_min <= p0_max <= 1");
    if (!(bounds.kappa_max >= 0.0)) throw ConfigError("prune.kappa_max must be >= 0");
}

double fine_tune(nnet::MaskedNetwork& net, const nnet::Batch& train, double lr, int epochs,
                 std::size_t batch_size, Rng& rng) {
    if (epochs < 1) throw ArgumentError("fine_tune requires at least one epoch");
    if (!(lr > 0.0)) throw ArgumentError("fine_tune learning rate must be positive");
    return nnet::train_epochs(net, train, lr, epochs, batch_size, rng);
}

ObjectiveValue evaluate_objective(const surgery::PruningParams& x, const EvalContext& ctx,
                                  int eval_idx) {
    nnet::restore(ctx.net, ctx.snap);
    RestoreGuard guard{ctx.net, ctx.snap};
    Rng rng(derive(ctx.cfg.seed, {kStreamEval, static_cast<std::uint64_t>(ctx.round),
                                  static_cast<std::uint64_t>(eval_idx)}));
    surgery::update_masks(ctx.net, x, 0, rng);
    for (int epoch = 1; epoch <= ctx.cfg.eval_epochs; ++epoch) {
        nnet::train_epochs(ctx.net, ctx.train, ctx.cfg.lr, 1, ctx.cfg.batch_size, rng);
        if (ctx.cfg.cadence == MaskCadence::per_epoch)
            surgery::update_masks(ctx.net, x, static_cast<std::size_t>(epoch), rng);
    }
    ObjectiveValue v;
    v.eps = nnet::top1_error(ctx.net, ctx.validation);
    v.s = surgery::sparsity(ctx.net);
    v.l = v.eps - ctx.cfg.lambda * v.s;
    return v;
}

RunReport run_fineprune(const FinePruneConfig& cfg, nnet::MaskedNetwork& net,
                        const SplitBatches& data, const bo::RecordSink& sink) {
    cfg.validate();
    if (net.layers.empty()) throw ArgumentError("network has no layers");

    RunReport report;
    report.mode = RunMode::fineprune;
    report.seed = cfg.seed;
    report.lambda = cfg.lambda;

    if (!initial_phase(report, cfg, net, data)) {
        finalize_report(report, net);
        return report;
    }

    bo::BOSettings settings = cfg.bo;
    settings.seed = derive(cfg.seed, {kStreamBo});

    double prev_l = 0.0, prev_s = report.rounds.back().s;
    bool have_prev = false;
    std::vector<double> incumbent_x;

    for (int round = 1; round <= cfg.max_rounds; ++round) {
        try {
            const std::vector<double>* incumbent = round == 1 ? nullptr : &incumbent_x;
            PruneRoundResult rr =
                prune_round(report, cfg, net, data, settings, round, incumbent, sink);
            const double cur_s = report.rounds.back().s;
            incumbent_x = std::move(rr.best_x);

            const bool converged = have_prev && std::abs(rr.best_l - prev_l) < cfg.outer_l_tol &&
                                   std::abs(cur_s - prev_s) < cfg.outer_s_tol;
            prev_l = rr.best_l;
            prev_s = cur_s;
            have_prev = true;
            if (converged) break;
        } catch (const std::exception& e) {
            report.incomplete = true;
            report.error = e.what();
            break;
        }
    }

    finalize_report(report, net);
    return report;
}

RunReport run_baseline(RunMode mode, const FinePruneConfig& cfg, nnet::MaskedNetwork& net,
                       const SplitBatches& data, const bo::RecordSink& sink) {
    cfg.validate();
    if (mode == RunMode::fineprune)
        throw ArgumentError("run_baseline expects finetune_only or independent");
    if (net.layers.empty()) throw ArgumentError("network has no layers");

    RunReport report;
    report.mode = mode;
    report.seed = cfg.seed;
    report.lambda = cfg.lambda;

    const int last = finetune_phase(report, cfg, net, data);
    if (last >= 0 && mode == RunMode::independent) {
        // Prune once, after fine-tuning has settled.
        try {
            bo::BOSettings settings = cfg.bo;
            settings.seed = derive(cfg.seed, {kStreamBo});
            prune_round(report, cfg, net, data, settings, last + 1, nullptr, sink);
        } catch (const std::exception& e) {
            report.incomplete = true;
            report.error = e.what();
        }
    }

    finalize_report(report, net);
    return report;
}

RunReport run(RunMode mode, const FinePruneConfig& cfg, nnet::MaskedNetwork& net,
              const SplitBatches& data, const bo::RecordSink& sink) {
    if (mode == RunMode::fineprune) return run_fineprune(cfg, net, data, sink);
    return run_baseline(mode, cfg, net, data, sink);
}

LambdaSelection select_lambda(const std::vector<double>& grid, const FinePruneConfig& cfg,
                              const nnet::MaskedNetwork& net, const SplitBatches& data) {
    if (grid.empty()) throw ArgumentError("lambda grid must not be empty");
    cfg.validate();

    LambdaSelection sel;
    {
        nnet::MaskedNetwork base = net;
        RunReport ft = run_baseline(RunMode::finetune_only, cfg, base, data);
        sel.baseline_val_error = ft.rounds.empty() ? 1.0 : ft.rounds.back().eps_val;
    }

    sel.reports.reserve(grid.size());
    for (double lam : grid) {
        FinePruneConfig per = cfg;
        per.lambda = lam;
        nnet::MaskedNetwork working = net;
        sel.reports.push_back(run_fineprune(per, working, data));
    }

    const std::size_t npos = grid.size();
    std::size_t best = npos;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const RunReport& r = sel.reports[i];
        if (r.incomplete || r.rounds.empty()) continue;
        if (r.rounds.back().eps_val > sel.baseline_val_error + cfg.tau) continue;
        if (best == npos || r.compression > sel.reports[best].compression) best = i;
    }
    if (best == npos) {
        // Nothing inside the tolerance: fall back to the most accurate run.
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const RunReport& r = sel.reports[i];
            if (r.incomplete || r.rounds.empty()) continue;
            if (best == npos ||
                r.rounds.back().eps_val < sel.reports[best].rounds.back().eps_val)
                best = i;
        }
    }
    if (best == npos) best = 0;
    sel.index = best;
    sel.lambda = grid[best];
    return sel;
}

}  // namespace fp::finepruner
