#include "fineprune/surgery.hpp"

#include <cmath>
#include <string>

#include "fineprune/errors.hpp"
#include "fineprune/kernels.hpp"

namespace fp::surgery {

namespace ker = fp::kernels;

double cooling_probability(double p0, double kappa, std::size_t iter) {
    if (!(p0 > 0.0 && p0 <= 1.0)) throw ArgumentError("p0 must be in (0, 1]");
    if (!(kappa >= 0.0)) throw ArgumentError("kappa must be >= 0");
    return p0 / (1.0 + kappa * static_cast<double>(iter));
}

namespace {

double weight_stddev(const std::vector<double>& w) {
    if (w.empty()) return 0.0;
    double n = static_cast<double>(w.size());
    double mean = ker::sum(w.data(), w.size()) / n;
    double var = ker::sumsq(w.data(), w.size()) / n - mean * mean;
    return std::sqrt(var > 0.0 ? var : 0.0);
}

}  // namespace

MaskUpdateStats update_masks(nnet::MaskedNetwork& net, const PruningParams& params,
                             std::size_t iter, Rng& rng) {
    if (params.layers.size() != net.layers.size())
        throw ArgumentError("pruning params cover " + std::to_string(params.layers.size()) +
                            " layers, network has " + std::to_string(net.layers.size()));
    double p = cooling_probability(params.p0, params.kappa, iter);

    MaskUpdateStats stats;
    stats.layers.resize(net.layers.size());
    std::size_t total_weights = 0, total_zero = 0;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        nnet::MaskedLayer& layer = net.layers[l];
        LayerUpdateStats& ls = stats.layers[l];
        const LayerThresholds& th = params.layers[l];
        if (th.a < 0.0 || th.m < 0.0)
            throw ArgumentError("thresholds must be >= 0 (layer " + std::to_string(l) + ")");
        if (rng.bernoulli(p)) {
            ls.updated = true;
            double sigma = weight_stddev(layer.weights);
            double lo = th.a * sigma;
            double hi = (th.a + th.m) * sigma;
            for (std::size_t i = 0; i < layer.weights.size(); ++i) {
                double mag = std::fabs(layer.weights[i]);
                if (mag < lo) {
                    if (layer.mask[i] != 0.0) ++ls.pruned;
                    layer.mask[i] = 0.0;
                } else if (mag >= hi) {
                    if (layer.mask[i] == 0.0) ++ls.spliced;
                    layer.mask[i] = 1.0;
                }
                // dead zone [lo, hi): mask keeps its previous state
            }
        }
        std::size_t zero = 0;
        for (double m : layer.mask)
            if (m == 0.0) ++zero;
        ls.sparsity = layer.mask.empty()
                          ? 0.0
                          : static_cast<double>(zero) / static_cast<double>(layer.mask.size());
        total_weights += layer.mask.size();
        total_zero += zero;
    }
    stats.global_sparsity =
        total_weights ? static_cast<double>(total_zero) / static_cast<double>(total_weights) : 0.0;
    return stats;
}

double layer_sparsity(const nnet::MaskedLayer& layer) {
    if (layer.mask.empty()) return 0.0;
    std::size_t zero = 0;
    for (double m : layer.mask)
        if (m == 0.0) ++zero;
    return static_cast<double>(zero) / static_cast<double>(layer.mask.size());
}

double sparsity(const nnet::MaskedNetwork& net) {
    std::size_t total = 0, zero = 0;
    for (const auto& layer : net.layers) {
        total += layer.mask.size();
        for (double m : layer.mask)
            if (m == 0.0) ++zero;
    }
    return total ? static_cast<double>(zero) / static_cast<double>(total) : 0.0;
}

namespace {

double to_unit(double v, double lo, double hi, const char* what) {
    if (v < lo || v > hi)
        throw ArgumentError(std::string(what) + " out of bounds");
    double range = hi - lo;
    return range > 0.0 ? (v - lo) / range : 0.0;
}

double from_unit(double u, double lo, double hi, const char* what) {
    if (u < 0.0 || u > 1.0)
        throw ArgumentError(std::string(what) + ": normalized component outside [0,1]");
    return lo + u * (hi - lo);
}

}  // namespace

std::vector<double> normalize(const PruningParams& params, const PruningBounds& bounds) {
    std::vector<double> x;
    x.reserve(params.dim());
    for (const LayerThresholds& th : params.layers) {
        x.push_back(to_unit(th.a, 0.0, bounds.a_max, "threshold a"));
        x.push_back(to_unit(th.m, 0.0, bounds.m_max, "margin m"));
    }
    x.push_back(to_unit(params.p0, bounds.p0_min, bounds.p0_max, "p0"));
    x.push_back(to_unit(params.kappa, 0.0, bounds.kappa_max, "kappa"));
    return x;
}

PruningParams denormalize(std::span<const double> point, std::size_t n_layers,
                          const PruningBounds& bounds) {
    if (point.size() != 2 * n_layers + 2)
        throw ArgumentError("point dimension " + std::to_string(point.size()) +
                            " does not match 2L+2 for L=" + std::to_string(n_layers));
    PruningParams params;
    params.layers.resize(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l) {
        params.layers[l].a = from_unit(point[2 * l], 0.0, bounds.a_max, "threshold a");
        params.layers[l].m = from_unit(point[2 * l + 1], 0.0, bounds.m_max, "margin m");
    }
    params.p0 = from_unit(point[2 * n_layers], bounds.p0_min, bounds.p0_max, "p0");
    params.kappa = from_unit(point[2 * n_layers + 1], 0.0, bounds.kappa_max, "kappa");
    return params;
}

}  // namespace fp::surgery
