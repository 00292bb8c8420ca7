#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fineprune/rng.hpp"

namespace fp::nnet {

enum class LayerKind : std::uint32_t { dense = 0, conv2d = 1 };
enum class Activation { relu, identity };

// Shape of one layer. Activations are applied after the linear map; the
// softmax lives in the loss, so classifier heads use identity.
struct LayerSpec {
    LayerKind kind = LayerKind::dense;
    Activation activation = Activation::relu;

    // dense
    std::size_t in_dim = 0, out_dim = 0;

    // conv2d (valid padding)
    std::size_t in_channels = 0, out_channels = 0;
    std::size_t kernel_size = 0, stride = 1;
    std::size_t in_h = 0, in_w = 0;

    static LayerSpec dense(std::size_t in, std::size_t out,
                           Activation act = Activation::relu);
    static LayerSpec conv(std::size_t in_c, std::size_t out_c, std::size_t k,
                          std::size_t stride, std::size_t in_h, std::size_t in_w,
                          Activation act = Activation::relu);

    std::size_t out_h() const { return (in_h - kernel_size) / stride + 1; }
    std::size_t out_w() const { return (in_w - kernel_size) / stride + 1; }
    std::size_t input_size() const;
    std::size_t output_size() const;
    std::size_t weight_count() const;
    std::size_t bias_count() const;
    bool operator==(const LayerSpec&) const = default;
};

// Throws ShapeError if dimensions are invalid or consecutive layers do not
// compose.
void validate_spec(const std::vector<LayerSpec>& spec);

// Weights with a congruent 0/1 mask. The bias is never masked. Dense weights
// are row-major [out][in]; conv weights are [out_c][in_c][k][k].
struct MaskedLayer {
    LayerSpec spec;
    std::vector<double> weights;
    std::vector<double> bias;
    std::vector<double> mask;  // entries are exactly 0.0 or 1.0
};

struct MaskedNetwork {
    std::vector<MaskedLayer> layers;
    std::uint64_t seed = 0;

    std::vector<LayerSpec> spec() const;
    std::size_t weight_count() const;
    std::size_t bias_count() const;
    std::size_t parameter_count() const;  // weights + biases
    std::size_t nonzero_weight_count() const;
    std::size_t input_size() const { return layers.front().spec.input_size(); }
    std::size_t class_count() const { return layers.back().spec.output_size(); }
};

// Row-major inputs, one sample per row.
struct Batch {
    std::vector<double> inputs;
    std::vector<int> labels;
    std::size_t rows = 0, cols = 0;

    const double* row(std::size_t i) const { return inputs.data() + i * cols; }
};

// He-initialized network (fan-in scaled normals, seeded, biases zero,
// masks all ones).
MaskedNetwork init_network(const std::vector<LayerSpec>& spec, std::uint64_t seed);

// Logits for a batch, rows x class_count. Masked weights contribute zero.
std::vector<double> forward(const MaskedNetwork& net, const Batch& batch);

// Mean softmax cross-entropy of the batch, via log-sum-exp.
double evaluate_loss(const MaskedNetwork& net, const Batch& batch);

struct Gradients {
    // d loss / d effective-weight position (mask treated as 1); this is the
    // signal applied to every stored weight by sgd_step, pruned or not.
    std::vector<std::vector<double>> weights_eff;
    std::vector<std::vector<double>> bias;
    // True derivative w.r.t. the stored weight: weights_eff * mask.
    std::vector<std::vector<double>> masked(const MaskedNetwork& net) const;
};

// Backprop without updating; returns the loss.
double backward(const MaskedNetwork& net, const Batch& batch, Gradients& grads);

// One SGD step on the batch. All stored weights are updated, including
// masked ones; masks are untouched. Throws NumericError (with the layer
// index) on non-finite intermediate values.
double sgd_step(MaskedNetwork& net, const Batch& batch, double lr);

// Fraction of samples whose argmax logit differs from the label. Ties pick
// the lowest class index.
double top1_error(const MaskedNetwork& net, const Batch& data);
double top1_error(const MaskedNetwork& net, std::span<const Batch> stream);

// Shuffled mini-batch SGD for `epochs` passes; returns the mean loss of the
// final epoch (0 if epochs == 0).
double train_epochs(MaskedNetwork& net, const Batch& data, double lr, int epochs,
                    std::size_t batch_size, Rng& rng);

struct NetworkState {
    std::vector<LayerSpec> spec;
    std::vector<std::vector<double>> weights, bias, mask;
};

NetworkState snapshot(const MaskedNetwork& net);
// Throws ShapeError if the state was taken from a different spec.
void restore(MaskedNetwork& net, const NetworkState& state);
bool same_values(const MaskedNetwork& net, const NetworkState& state);  // bitwise

// FPN1 checkpoint container: magic "FPN1", little-endian u32 layer count,
// then per layer a u32 kind tag, u32 rank + dims, f64 weights, f64 biases,
// and the mask as 0/1 bytes.
void save_checkpoint(const MaskedNetwork& net, const std::filesystem::path& path);
void load_checkpoint(MaskedNetwork& net, const std::filesystem::path& path);

struct CheckpointLayerSummary {
    LayerKind kind;
    std::vector<std::uint32_t> dims;
    std::size_t weight_count = 0, bias_count = 0, nonzero_mask = 0;
};
// Reads shape/mask bookkeeping without needing a spec.
std::vector<CheckpointLayerSummary> read_checkpoint_summary(const std::filesystem::path& path);

}  // namespace fp::nnet
