#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fineprune/nnet.hpp"
#include "fineprune/rng.hpp"

namespace fp::surgery {

// Search-space box for the pruning parameters. Thresholds are expressed in
// multiples of the per-layer weight standard deviation, so one box covers
// layers of very different magnitude.
struct PruningBounds {
    double a_max = 3.0;
    double m_max = 1.0;
    double p0_min = 0.05, p0_max = 1.0;
    double kappa_max = 10.0;
    bool operator==(const PruningBounds&) const = default;
};

struct LayerThresholds {
    double a = 0.0;  // prune below a*sigma
    double m = 0.0;  // splice above (a+m)*sigma; [a, a+m) is the dead zone
};

// One point of the search space: per-layer thresholds plus the global
// mask-update schedule (p0, kappa). Dimension is 2L + 2.
struct PruningParams {
    std::vector<LayerThresholds> layers;
    double p0 = 1.0;
    double kappa = 0.0;

    std::size_t dim() const { return 2 * layers.size() + 2; }
};

struct LayerUpdateStats {
    std::size_t pruned = 0;   // 1 -> 0 transitions
    std::size_t spliced = 0;  // 0 -> 1 transitions
    double sparsity = 0.0;
    bool updated = false;  // whether the Bernoulli gate fired
};

struct MaskUpdateStats {
    std::vector<LayerUpdateStats> layers;
    double global_sparsity = 0.0;
};

// p(iter) = p0 / (1 + kappa*iter). Throws ArgumentError for p0 outside
// (0,1] or kappa < 0.
double cooling_probability(double p0, double kappa, std::size_t iter);

// Prune/splice pass over every layer. Each layer's mask is recomputed with
// probability p(iter) (one Bernoulli draw per layer): entries below
// a*sigma are pruned, entries at or above (a+m)*sigma are spliced back in,
// and the dead zone in between keeps its previous state. sigma is the
// population standard deviation of the layer's stored weights, masked
// entries included.
MaskUpdateStats update_masks(nnet::MaskedNetwork& net, const PruningParams& params,
                             std::size_t iter, Rng& rng);

// Fraction of zero mask entries over all weight entries; biases excluded.
double sparsity(const nnet::MaskedNetwork& net);
double layer_sparsity(const nnet::MaskedLayer& layer);

// Affine map onto [0,1]^d, component layout
// [a_0, m_0, a_1, m_1, ..., p0, kappa]. Degenerate bounds (zero range) map
// to 0. Throws ArgumentError for out-of-bounds components.
std::vector<double> normalize(const PruningParams& params, const PruningBounds& bounds);
PruningParams denormalize(std::span<const double> point, std::size_t n_layers,
                          const PruningBounds& bounds);

}  // namespace fp::surgery
