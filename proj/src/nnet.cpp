#include "fineprune/nnet.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "fineprune/errors.hpp"
#include "fineprune/kernels.hpp"

namespace fp::nnet {

namespace ker = fp::kernels;

// ---- LayerSpec ----

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out, Activation act) {
    LayerSpec s;
    s.kind = LayerKind::dense;
    s.in_dim = in;
    s.out_dim = out;
    s.activation = act;
    return s;
}

LayerSpec LayerSpec::conv(std::size_t in_c, std::size_t out_c, std::size_t k,
                          std::size_t stride, std::size_t in_h, std::size_t in_w,
                          Activation act) {
    LayerSpec s;
    s.kind = LayerKind::conv2d;
    s.in_channels = in_c;
    s.out_channels = out_c;
    s.kernel_size = k;
    s.stride = stride;
    s.in_h = in_h;
    s.in_w = in_w;
    s.activation = act;
    return s;
}

std::size_t LayerSpec::input_size() const {
    return kind == LayerKind::dense ? in_dim : in_channels * in_h * in_w;
}

std::size_t LayerSpec::output_size() const {
    return kind == LayerKind::dense ? out_dim : out_channels * out_h() * out_w();
}

std::size_t LayerSpec::weight_count() const {
    return kind == LayerKind::dense
               ? in_dim * out_dim
               : out_channels * in_channels * kernel_size * kernel_size;
}

std::size_t LayerSpec::bias_count() const {
    return kind == LayerKind::dense ? out_dim : out_channels;
}

void validate_spec(const std::vector<LayerSpec>& spec) {
    if (spec.empty()) throw ShapeError("network needs at least one layer");
    for (std::size_t l = 0; l < spec.size(); ++l) {
        const LayerSpec& s = spec[l];
        std::string where = "layer " + std::to_string(l);
        if (s.kind == LayerKind::dense) {
            if (s.in_dim < 1 || s.out_dim < 1)
                throw ShapeError(where + ": dense dimensions must be >= 1");
        } else {
            if (s.in_channels < 1 || s.out_channels < 1 || s.kernel_size < 1 ||
                s.stride < 1 || s.in_h < 1 || s.in_w < 1)
                throw ShapeError(where + ": conv dimensions must be >= 1");
            if (s.kernel_size > s.in_h || s.kernel_size > s.in_w)
                throw ShapeError(where + ": kernel larger than input");
        }
        if (l > 0 && spec[l - 1].output_size() != s.input_size())
            throw ShapeError(where + ": input size " + std::to_string(s.input_size()) +
                             " does not match previous output " +
                             std::to_string(spec[l - 1].output_size()));
    }
}

// ---- MaskedNetwork ----

std::vector<LayerSpec> MaskedNetwork::spec() const {
    std::vector<LayerSpec> s;
    s.reserve(layers.size());
    for (const auto& l : layers) s.push_back(l.spec);
    return s;
}

std::size_t MaskedNetwork::weight_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weights.size();
    return n;
}

std::size_t MaskedNetwork::bias_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.bias.size();
    return n;
}

std::size_t MaskedNetwork::parameter_count() const { return weight_count() + bias_count(); }

std::size_t MaskedNetwork::nonzero_weight_count() const {
    std::size_t n = 0;
    for (const auto& l : layers)
        for (double m : l.mask)
            if (m != 0.0) ++n;
    return n;
}

MaskedNetwork init_network(const std::vector<LayerSpec>& spec, std::uint64_t seed) {
    validate_spec(spec);
    MaskedNetwork net;
    net.seed = seed;
    Rng rng(seed);
    for (const LayerSpec& s : spec) {
        MaskedLayer layer;
        layer.spec = s;
        std::size_t fan_in =
            s.kind == LayerKind::dense ? s.in_dim : s.in_channels * s.kernel_size * s.kernel_size;
        double sigma = std::sqrt(2.0 / static_cast<double>(fan_in));
        layer.weights.resize(s.weight_count());
        for (double& w : layer.weights) w = rng.normal(0.0, sigma);
        layer.bias.assign(s.bias_count(), 0.0);
        layer.mask.assign(s.weight_count(), 1.0);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

// ---- forward / backward ----

namespace {

void check_input_shape(const MaskedNetwork& net, const Batch& batch) {
    if (batch.rows < 1) throw ArgumentError("empty batch");
    if (batch.cols != net.input_size())
        throw ShapeError("batch features " + std::to_string(batch.cols) +
                         " do not match network input " + std::to_string(net.input_size()));
    if (batch.inputs.size() != batch.rows * batch.cols)
        throw ShapeError("batch buffer size mismatch");
}

void effective_weights(const MaskedLayer& layer, std::vector<double>& eff) {
    eff.resize(layer.weights.size());
    ker::mul(layer.weights.data(), layer.mask.data(), eff.data(), eff.size());
}

// z = linear(input) for one layer; input rows x in, z rows x out.
void linear_forward(const MaskedLayer& layer, const std::vector<double>& eff,
                    const std::vector<double>& input, std::size_t rows,
                    std::vector<double>& z) {
    const LayerSpec& s = layer.spec;
    std::size_t in = s.input_size(), out = s.output_size();
    z.assign(rows * out, 0.0);
    if (s.kind == LayerKind::dense) {
        for (std::size_t r = 0; r < rows; ++r) {
            const double* x = input.data() + r * in;
            double* y = z.data() + r * out;
            for (std::size_t j = 0; j < out; ++j)
                y[j] = ker::dot(eff.data() + j * in, x, in) + layer.bias[j];
        }
        return;
    }
    std::size_t oh = s.out_h(), ow = s.out_w(), k = s.kernel_size, st = s.stride;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* x = input.data() + r * in;
        double* y = z.data() + r * out;
        for (std::size_t oc = 0; oc < s.out_channels; ++oc) {
            for (std::size_t oy = 0; oy < oh; ++oy) {
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    double acc = layer.bias[oc];
                    for (std::size_t ic = 0; ic < s.in_channels; ++ic) {
                        for (std::size_t ky = 0; ky < k; ++ky) {
                            const double* xrow =
                                x + (ic * s.in_h + oy * st + ky) * s.in_w + ox * st;
                            const double* wrow =
                                eff.data() + ((oc * s.in_channels + ic) * k + ky) * k;
                            acc += ker::dot(wrow, xrow, k);
                        }
                    }
                    y[(oc * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
}

// Accumulates dW/db and the input gradient from dz.
void linear_backward(const MaskedLayer& layer, const std::vector<double>& eff,
                     const std::vector<double>& input, std::size_t rows,
                     const std::vector<double>& dz, std::vector<double>& dw,
                     std::vector<double>& db, std::vector<double>& dx) {
    const LayerSpec& s = layer.spec;
    std::size_t in = s.input_size(), out = s.output_size();
    dw.assign(layer.weights.size(), 0.0);
    db.assign(layer.bias.size(), 0.0);
    dx.assign(rows * in, 0.0);
    if (s.kind == LayerKind::dense) {
        for (std::size_t r = 0; r < rows; ++r) {
            const double* x = input.data() + r * in;
            const double* d = dz.data() + r * out;
            double* gx = dx.data() + r * in;
            for (std::size_t j = 0; j < out; ++j) {
                ker::axpy(d[j], x, dw.data() + j * in, in);
                ker::axpy(d[j], eff.data() + j * in, gx, in);
                db[j] += d[j];
            }
        }
        return;
    }
    std::size_t oh = s.out_h(), ow = s.out_w(), k = s.kernel_size, st = s.stride;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* x = input.data() + r * in;
        const double* d = dz.data() + r * out;
        double* gx = dx.data() + r * in;
        for (std::size_t oc = 0; oc < s.out_channels; ++oc) {
            for (std::size_t oy = 0; oy < oh; ++oy) {
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    double g = d[(oc * oh + oy) * ow + ox];
                    db[oc] += g;
                    for (std::size_t ic = 0; ic < s.in_channels; ++ic) {
                        for (std::size_t ky = 0; ky < k; ++ky) {
                            std::size_t xoff = (ic * s.in_h + oy * st + ky) * s.in_w + ox * st;
                            std::size_t woff = ((oc * s.in_channels + ic) * k + ky) * k;
                            ker::axpy(g, x + xoff, dw.data() + woff, k);
                            ker::axpy(g, eff.data() + woff, gx + xoff, k);
                        }
                    }
                }
            }
        }
    }
}

struct ForwardCache {
    // acts[0] is the input; acts[l+1] the post-activation output of layer l.
    std::vector<std::vector<double>> acts;
    std::vector<std::vector<double>> zs;  // pre-activation per layer
    std::vector<std::vector<double>> eff;
};

void cached_forward(const MaskedNetwork& net, const Batch& batch, ForwardCache& cache,
                    bool check_finite) {
    check_input_shape(net, batch);
    std::size_t L = net.layers.size();
    cache.acts.assign(L + 1, {});
    cache.zs.assign(L, {});
    cache.eff.assign(L, {});
    cache.acts[0] = batch.inputs;
    for (std::size_t l = 0; l < L; ++l) {
        const MaskedLayer& layer = net.layers[l];
        effective_weights(layer, cache.eff[l]);
        linear_forward(layer, cache.eff[l], cache.acts[l], batch.rows, cache.zs[l]);
        if (check_finite) {
            for (double v : cache.zs[l])
                if (!std::isfinite(v))
                    throw NumericError("non-finite activation in layer " + std::to_string(l),
                                       static_cast<int>(l));
        }
        if (layer.spec.activation == Activation::relu) {
            cache.acts[l + 1].resize(cache.zs[l].size());
            ker::relu(cache.zs[l].data(), cache.acts[l + 1].data(), cache.zs[l].size());
        } else {
            cache.acts[l + 1] = cache.zs[l];
        }
    }
}

// Mean cross-entropy and d loss/d logits (already divided by batch size).
double softmax_xent(const std::vector<double>& logits, const std::vector<int>& labels,
                    std::size_t rows, std::size_t classes, std::vector<double>* dlogits) {
    if (dlogits) dlogits->assign(rows * classes, 0.0);
    double total = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* z = logits.data() + r * classes;
        int label = labels[r];
        if (label < 0 || static_cast<std::size_t>(label) >= classes)
            throw ArgumentError("label " + std::to_string(label) + " out of range");
        double zmax = *std::max_element(z, z + classes);
        double denom = 0.0;
        for (std::size_t c = 0; c < classes; ++c) denom += std::exp(z[c] - zmax);
        double lse = zmax + std::log(denom);
        total += lse - z[label];
        if (dlogits) {
            double* d = dlogits->data() + r * classes;
            double inv = 1.0 / static_cast<double>(rows);
            for (std::size_t c = 0; c < classes; ++c)
                d[c] = (std::exp(z[c] - zmax) / denom) * inv;
            d[label] -= inv;
        }
    }
    return total / static_cast<double>(rows);
}

double backprop(const MaskedNetwork& net, const Batch& batch, Gradients& grads,
                bool check_finite) {
    ForwardCache cache;
    cached_forward(net, batch, cache, check_finite);
    std::size_t L = net.layers.size();
    std::size_t classes = net.class_count();

    std::vector<double> da;
    double loss = softmax_xent(cache.acts[L], batch.labels, batch.rows, classes, &da);
    if (check_finite && !std::isfinite(loss))
        throw NumericError("non-finite loss", static_cast<int>(L) - 1);

    grads.weights_eff.assign(L, {});
    grads.bias.assign(L, {});
    std::vector<double> dz, dx;
    for (std::size_t l = L; l-- > 0;) {
        const MaskedLayer& layer = net.layers[l];
        if (layer.spec.activation == Activation::relu) {
            dz.resize(da.size());
            const std::vector<double>& z = cache.zs[l];
            for (std::size_t i = 0; i < da.size(); ++i) dz[i] = z[i] > 0.0 ? da[i] : 0.0;
        } else {
            dz = da;
        }
        linear_backward(layer, cache.eff[l], cache.acts[l], batch.rows, dz,
                        grads.weights_eff[l], grads.bias[l], dx);
        da = dx;
    }
    return loss;
}

}  // namespace

std::vector<double> forward(const MaskedNetwork& net, const Batch& batch) {
    ForwardCache cache;
    cached_forward(net, batch, cache, false);
    return std::move(cache.acts.back());
}

double evaluate_loss(const MaskedNetwork& net, const Batch& batch) {
    std::vector<double> logits = forward(net, batch);
    return softmax_xent(logits, batch.labels, batch.rows, net.class_count(), nullptr);
}

std::vector<std::vector<double>> Gradients::masked(const MaskedNetwork& net) const {
    std::vector<std::vector<double>> out(weights_eff.size());
    for (std::size_t l = 0; l < weights_eff.size(); ++l) {
        out[l].resize(weights_eff[l].size());
        ker::mul(weights_eff[l].data(), net.layers[l].mask.data(), out[l].data(),
                 out[l].size());
    }
    return out;
}

double backward(const MaskedNetwork& net, const Batch& batch, Gradients& grads) {
    return backprop(net, batch, grads, true);
}

double sgd_step(MaskedNetwork& net, const Batch& batch, double lr) {
    if (lr < 0.0) throw ArgumentError("learning rate must be >= 0");
    Gradients grads;
    double loss = backprop(net, batch, grads, true);
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        MaskedLayer& layer = net.layers[l];
        ker::axpy(-lr, grads.weights_eff[l].data(), layer.weights.data(),
                  layer.weights.size());
        ker::axpy(-lr, grads.bias[l].data(), layer.bias.data(), layer.bias.size());
    }
    return loss;
}

double top1_error(const MaskedNetwork& net, const Batch& data) {
    if (data.rows == 0) throw ArgumentError("top1_error on empty data");
    std::vector<double> logits = forward(net, data);
    std::size_t classes = net.class_count();
    std::size_t wrong = 0;
    for (std::size_t r = 0; r < data.rows; ++r) {
        const double* z = logits.data() + r * classes;
        std::size_t best = 0;
        for (std::size_t c = 1; c < classes; ++c)
            if (z[c] > z[best]) best = c;
        if (static_cast<int>(best) != data.labels[r]) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(data.rows);
}

double top1_error(const MaskedNetwork& net, std::span<const Batch> stream) {
    std::size_t wrong = 0, total = 0;
    for (const Batch& b : stream) {
        double err = top1_error(net, b);
        wrong += static_cast<std::size_t>(std::llround(err * static_cast<double>(b.rows)));
        total += b.rows;
    }
    if (total == 0) throw ArgumentError("top1_error on empty stream");
    return static_cast<double>(wrong) / static_cast<double>(total);
}

double train_epochs(MaskedNetwork& net, const Batch& data, double lr, int epochs,
                    std::size_t batch_size, Rng& rng) {
    if (epochs < 0) throw ArgumentError("epochs must be >= 0");
    if (batch_size < 1) throw ArgumentError("batch size must be >= 1");
    check_input_shape(net, data);
    std::vector<std::size_t> order(data.rows);
    std::iota(order.begin(), order.end(), 0);
    double last_epoch_loss = 0.0;
    Batch mini;
    mini.cols = data.cols;
    for (int e = 0; e < epochs; ++e) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t steps = 0;
        for (std::size_t start = 0; start < data.rows; start += batch_size) {
            std::size_t end = std::min(start + batch_size, data.rows);
            mini.rows = end - start;
            mini.inputs.resize(mini.rows * mini.cols);
            mini.labels.resize(mini.rows);
            for (std::size_t i = start; i < end; ++i) {
                std::size_t src = order[i];
                std::copy_n(data.row(src), data.cols,
                            mini.inputs.begin() + (i - start) * mini.cols);
                mini.labels[i - start] = data.labels[src];
            }
            loss_sum += sgd_step(net, mini, lr);
            ++steps;
        }
        last_epoch_loss = steps ? loss_sum / static_cast<double>(steps) : 0.0;
    }
    return last_epoch_loss;
}

// ---- snapshot / restore ----

NetworkState snapshot(const MaskedNetwork& net) {
    NetworkState state;
    state.spec = net.spec();
    for (const auto& l : net.layers) {
        state.weights.push_back(l.weights);
        state.bias.push_back(l.bias);
        state.mask.push_back(l.mask);
    }
    return state;
}

void restore(MaskedNetwork& net, const NetworkState& state) {
    if (state.spec != net.spec())
        throw ShapeError("snapshot spec does not match network");
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        net.layers[l].weights = state.weights[l];
        net.layers[l].bias = state.bias[l];
        net.layers[l].mask = state.mask[l];
    }
}

namespace {
bool bits_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() &&
           (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}
}  // namespace

bool same_values(const MaskedNetwork& net, const NetworkState& state) {
    if (state.spec != net.spec()) return false;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        if (!bits_equal(net.layers[l].weights, state.weights[l]) ||
            !bits_equal(net.layers[l].bias, state.bias[l]) ||
            !bits_equal(net.layers[l].mask, state.mask[l]))
            return false;
    }
    return true;
}

// ---- FPN1 checkpoint ----

namespace {

constexpr char kMagic[4] = {'F', 'P', 'N', '1'};

void put_u32(std::ostream& os, std::uint32_t v) {
    char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                 static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    os.write(b, 4);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw ParseError("truncated checkpoint");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& os, double v) {
    std::uint64_t u = std::bit_cast<std::uint64_t>(v);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((u >> (8 * i)) & 0xff);
    os.write(b, 8);
}

double get_f64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw ParseError("truncated checkpoint");
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(u);
}

std::vector<std::uint32_t> layer_dims(const LayerSpec& s) {
    if (s.kind == LayerKind::dense)
        return {static_cast<std::uint32_t>(s.out_dim), static_cast<std::uint32_t>(s.in_dim)};
    return {static_cast<std::uint32_t>(s.out_channels), static_cast<std::uint32_t>(s.in_channels),
            static_cast<std::uint32_t>(s.kernel_size), static_cast<std::uint32_t>(s.kernel_size)};
}

struct RawLayer {
    LayerKind kind;
    std::vector<std::uint32_t> dims;
    std::vector<double> weights, bias;
    std::vector<double> mask;
};

RawLayer read_layer(std::istream& is, bool load_values) {
    RawLayer raw;
    std::uint32_t kind = get_u32(is);
    if (kind > 1) throw ParseError("unknown layer kind tag " + std::to_string(kind));
    raw.kind = static_cast<LayerKind>(kind);
    std::uint32_t rank = get_u32(is);
    if (rank < 1 || rank > 8) throw ParseError("bad shape rank " + std::to_string(rank));
    raw.dims.resize(rank);
    std::size_t count = 1;
    for (std::uint32_t& d : raw.dims) {
        d = get_u32(is);
        count *= d;
    }
    std::size_t biases = raw.dims[0];
    if (load_values) {
        raw.weights.resize(count);
        for (double& w : raw.weights) w = get_f64(is);
        raw.bias.resize(biases);
        for (double& b : raw.bias) b = get_f64(is);
        raw.mask.resize(count);
        for (double& m : raw.mask) {
            char byte;
            is.read(&byte, 1);
            if (!is) throw ParseError("truncated checkpoint");
            if (byte != 0 && byte != 1) throw ParseError("mask byte not 0/1");
            m = byte ? 1.0 : 0.0;
        }
    } else {
        is.seekg(static_cast<std::streamoff>(count * 8 + biases * 8), std::ios::cur);
        raw.mask.resize(count);
        std::vector<char> bytes(count);
        is.read(bytes.data(), static_cast<std::streamsize>(count));
        if (!is) throw ParseError("truncated checkpoint");
        for (std::size_t i = 0; i < count; ++i) raw.mask[i] = bytes[i] ? 1.0 : 0.0;
    }
    return raw;
}

}  // namespace

void save_checkpoint(const MaskedNetwork& net, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os.write(kMagic, 4);
    put_u32(os, static_cast<std::uint32_t>(net.layers.size()));
    for (const MaskedLayer& layer : net.layers) {
        put_u32(os, static_cast<std::uint32_t>(layer.spec.kind));
        std::vector<std::uint32_t> dims = layer_dims(layer.spec);
        put_u32(os, static_cast<std::uint32_t>(dims.size()));
        for (std::uint32_t d : dims) put_u32(os, d);
        for (double w : layer.weights) put_f64(os, w);
        for (double b : layer.bias) put_f64(os, b);
        for (double m : layer.mask) os.put(m != 0.0 ? char(1) : char(0));
    }
    if (!os) throw IoError("write failed: " + path.string());
}

void load_checkpoint(MaskedNetwork& net, const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw ParseError("bad checkpoint magic in " + path.string());
    std::uint32_t count = get_u32(is);
    if (count != net.layers.size())
        throw ShapeError("checkpoint has " + std::to_string(count) + " layers, network has " +
                         std::to_string(net.layers.size()));
    for (MaskedLayer& layer : net.layers) {
        RawLayer raw = read_layer(is, true);
        if (raw.kind != layer.spec.kind || raw.dims != layer_dims(layer.spec))
            throw ShapeError("checkpoint layer shape does not match network spec");
        layer.weights = std::move(raw.weights);
        layer.bias = std::move(raw.bias);
        layer.mask = std::move(raw.mask);
    }
}

std::vector<CheckpointLayerSummary> read_checkpoint_summary(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw ParseError("bad checkpoint magic in " + path.string());
    std::uint32_t count = get_u32(is);
    std::vector<CheckpointLayerSummary> out;
    for (std::uint32_t l = 0; l < count; ++l) {
        RawLayer raw = read_layer(is, false);
        CheckpointLayerSummary s;
        s.kind = raw.kind;
        s.dims = raw.dims;
        s.weight_count = raw.mask.size();
        s.bias_count = raw.dims[0];
        for (double m : raw.mask)
            if (m != 0.0) ++s.nonzero_mask;
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace fp::nnet
