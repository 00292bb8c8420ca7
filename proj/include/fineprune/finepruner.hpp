#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fineprune/bo.hpp"
#include "fineprune/nnet.hpp"
#include "fineprune/rng.hpp"
#include "fineprune/surgery.hpp"

namespace fp::finepruner {

enum class RunMode { finetune_only, independent, fineprune };

RunMode parse_mode(const std::string& name);  // throws ConfigError on unknown names
std::string mode_name(RunMode mode);

// Whether candidate fine-tuning re-runs surgery after every epoch (the
// cooling schedule advances) or only applies masks once up front.
enum class MaskCadence { once, per_epoch };

struct FinePruneConfig {
    double lambda = 1.0;          // sparsity weight in l = eps - lambda*s
    int max_rounds = 10;          // outer prune/fine-tune iterations
    double lr = 0.001;
    int init_epochs = 200;        // initial fine-tune after head replacement
    int ft_epochs = 10;           // fine-tune epochs per outer round
    int eval_epochs = 2;          // fine-tune epochs inside candidate evaluation
    double tau = 0.02;            // accuracy tolerance for lambda selection
    std::size_t n_init = 5;       // random-search warm start size (first round)
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;
    MaskCadence cadence = MaskCadence::per_epoch;
    double outer_l_tol = 1e-3;    // convergence threshold on best l
    double outer_s_tol = 0.005;   // convergence threshold on sparsity
    bool log_timings = false;     // keep wall_s at 0 for byte-stable logs
    surgery::PruningBounds bounds;
    bo::BOSettings bo;            // bo.seed is derived from `seed` at run time

    // Throws ConfigError on out-of-range fields.
    void validate() const;
};

struct SplitBatches {
    nnet::Batch train, validation, test;
};

// Per-outer-round summary measured on the persistent network after the
// round's pruning + fine-tuning. Round 0 is the post-initial-fine-tune
// state (no pruning, compression 1).
struct RoundResult {
    int round = 0;
    surgery::PruningParams params;     // empty for round 0 and baselines
    double eps_val = 0.0, eps_test = 0.0;
    double s = 0.0;
    double l = 0.0;                    // eps_val - lambda*s
    double compression = 1.0;          // total weights / nonzero weights
    std::size_t remaining_params = 0;  // nonzero weights + biases
    std::vector<double> layer_sparsity;
};

struct LayerReport {
    std::string name;  // e.g. "dense 2x64"
    std::size_t weights_total = 0, weights_nonzero = 0, bias_count = 0;
    double sparsity = 0.0;
};

struct RunReport {
    RunMode mode = RunMode::fineprune;
    std::uint64_t seed = 0;
    double lambda = 1.0;
    std::vector<RoundResult> rounds;
    std::vector<bo::EvalRecord> evals;     // every objective evaluation, in order
    std::vector<LayerReport> layers;       // final network state
    std::size_t total_weights = 0, total_biases = 0, remaining_weights = 0;
    double final_val_acc = 0.0, final_test_acc = 0.0;
    double compression = 1.0;
    bool incomplete = false;
    std::string error;
};

// Shuffled mini-batch SGD; masks untouched. Requires epochs >= 1.
double fine_tune(nnet::MaskedNetwork& net, const nnet::Batch& train, double lr, int epochs,
                 std::size_t batch_size, Rng& rng);

struct EvalContext {
    nnet::MaskedNetwork& net;
    const nnet::NetworkState& snap;
    const nnet::Batch& train;
    const nnet::Batch& validation;
    const FinePruneConfig& cfg;
    int round = 0;
};

struct ObjectiveValue {
    double eps = 0.0, s = 0.0, l = 0.0;
};

// Scores one pruning-parameter candidate: restore snapshot, run surgery,
// fine-tune eval_epochs epochs (surgery per cadence), measure validation
// error and sparsity. The persistent network is restored bitwise before
// returning, including on error.
ObjectiveValue evaluate_objective(const surgery::PruningParams& x, const EvalContext& ctx,
                                  int eval_idx);

// The full joint loop: initial fine-tune, then rounds of {warm start,
// Bayesian optimization over pruning parameters, apply best masks,
// fine-tune} until converged or max_rounds. Mutates `net` into the final
// pruned network.
RunReport run_fineprune(const FinePruneConfig& cfg, nnet::MaskedNetwork& net,
                        const SplitBatches& data, const bo::RecordSink& sink = {});

// finetune_only: fine-tune to the convergence budget, never pruning.
// independent: fine-tune fully first, then a single optimization round over
// pruning parameters and one final fine-tune.
RunReport run_baseline(RunMode mode, const FinePruneConfig& cfg, nnet::MaskedNetwork& net,
                       const SplitBatches& data, const bo::RecordSink& sink = {});

RunReport run(RunMode mode, const FinePruneConfig& cfg, nnet::MaskedNetwork& net,
              const SplitBatches& data, const bo::RecordSink& sink = {});

struct LambdaSelection {
    double lambda = 1.0;
    std::size_t index = 0;              // position in the grid
    double baseline_val_error = 0.0;    // finetune_only validation error
    std::vector<RunReport> reports;     // one fineprune run per grid value
};

// Runs the full loop per grid value and picks the lambda with the highest
// compression among runs whose validation error stays within tau of the
// finetune_only baseline; if none qualify, the lowest-error run wins.
LambdaSelection select_lambda(const std::vector<double>& grid, const FinePruneConfig& cfg,
                              const nnet::MaskedNetwork& net, const SplitBatches& data);

}  // namespace fp::finepruner
