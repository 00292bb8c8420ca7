#include "fineprune/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <utility>

#include "fineprune/errors.hpp"
#include "fineprune/rng.hpp"

namespace fp::data {
namespace {

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& cell, std::size_t line_no, const std::string& column) {
    double value = 0.0;
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end || cell.empty())
        throw ParseError("line " + std::to_string(line_no) + ", column '" + column +
                         "': non-numeric value '" + cell + "'");
    if (!std::isfinite(value))
        throw ParseError("line " + std::to_string(line_no) + ", column '" + column +
                         "': non-finite value '" + cell + "'");
    return value;
}

int parse_label(const std::string& cell, std::size_t line_no, const std::string& column) {
    int value = 0;
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end || cell.empty())
        throw ParseError("line " + std::to_string(line_no) + ", column '" + column +
                         "': label must be an integer, got '" + cell + "'");
    if (value < 0)
        throw ParseError("line " + std::to_string(line_no) + ", column '" + column +
                         "': label must be non-negative, got '" + cell + "'");
    return value;
}

Dataset take(const Dataset& ds, const std::vector<std::size_t>& indices) {
    Dataset out;
    out.cols = ds.cols;
    out.classes = ds.classes;
    out.provenance = ds.provenance;
    out.rows = indices.size();
    out.features.reserve(indices.size() * ds.cols);
    out.labels.reserve(indices.size());
    for (std::size_t idx : indices) {
        auto r = ds.row(idx);
        out.features.insert(out.features.end(), r.begin(), r.end());
        out.labels.push_back(ds.labels[idx]);
    }
    return out;
}

}  // namespace

Dataset generate_synthetic(int classes, int per_class, int dims, double spread,
                           std::uint64_t seed) {
    if (classes < 2) throw ArgumentError("synthetic data needs at least 2 classes");
    if (per_class < 1) throw ArgumentError("synthetic data needs at least 1 row per class");
    if (dims < 2) throw ArgumentError("synthetic data needs at least 2 dimensions");
    if (spread < 0.0) throw ArgumentError("spread must be non-negative");

    Rng rng(seed);
    const double phase = rng.uniform() * 2.0 * std::numbers::pi;

    Dataset ds;
    ds.cols = static_cast<std::size_t>(dims);
    ds.classes = classes;
    ds.rows = static_cast<std::size_t>(classes) * static_cast<std::size_t>(per_class);
    ds.provenance = Provenance::synthetic;
    ds.features.reserve(ds.rows * ds.cols);
    ds.labels.reserve(ds.rows);

    for (int c = 0; c < classes; ++c) {
        const double theta = phase + 2.0 * std::numbers::pi * c / classes;
        const double cx = std::cos(theta);
        const double cy = std::sin(theta);
        for (int i = 0; i < per_class; ++i) {
            for (int d = 0; d < dims; ++d) {
                double center = d == 0 ? cx : d == 1 ? cy : 0.0;
                ds.features.push_back(center + spread * rng.normal());
            }
            ds.labels.push_back(c);
        }
    }
    return ds;
}

SplitIndices split_indices(const Dataset& ds, const std::array<double, 3>& ratios,
                           std::uint64_t seed) {
    const double total = ratios[0] + ratios[1] + ratios[2];
    if (std::abs(total - 1.0) > 1e-9) throw ArgumentError("split ratios must sum to 1");
    for (double r : ratios)
        if (r < 0.0) throw ArgumentError("split ratios must be non-negative");
    if (ds.classes < 1) throw ArgumentError("dataset has no classes");

    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(ds.classes));
    for (std::size_t i = 0; i < ds.rows; ++i) {
        int label = ds.labels[i];
        if (label < 0 || label >= ds.classes)
            throw ArgumentError("label " + std::to_string(label) + " out of range at row " +
                                std::to_string(i));
        by_class[static_cast<std::size_t>(label)].push_back(i);
    }

    Rng rng(seed);
    SplitIndices out;
    for (int c = 0; c < ds.classes; ++c) {
        auto& rows = by_class[static_cast<std::size_t>(c)];
        if (rows.size() < 4)
            throw ArgumentError("class " + std::to_string(c) + " has " +
                                std::to_string(rows.size()) +
                                " rows; need at least 4 to stratify");
        rng.shuffle(rows);
        const auto n = rows.size();
        auto n_train = static_cast<std::size_t>(std::llround(ratios[0] * static_cast<double>(n)));
        auto n_val = static_cast<std::size_t>(std::llround(ratios[1] * static_cast<double>(n)));
        n_train = std::min(n_train, n);
        n_val = std::min(n_val, n - n_train);
        out.train.insert(out.train.end(), rows.begin(), rows.begin() + n_train);
        out.validation.insert(out.validation.end(), rows.begin() + n_train,
                              rows.begin() + n_train + n_val);
        out.test.insert(out.test.end(), rows.begin() + n_train + n_val, rows.end());
    }
    return out;
}

Splits split(const Dataset& ds, const std::array<double, 3>& ratios, std::uint64_t seed) {
    SplitIndices idx = split_indices(ds, ratios, seed);
    return Splits{take(ds, idx.train), take(ds, idx.validation), take(ds, idx.test)};
}

Dataset load_csv(const std::string& path, const std::string& label_column) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");

    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        header = split_fields(line);
        break;
    }
    if (header.empty()) throw ParseError("'" + path + "': no data rows");

    std::size_t label_idx = header.size();
    for (std::size_t i = 0; i < header.size() && label_idx == header.size(); ++i)
        if (header[i] == label_column) label_idx = i;
    if (label_idx == header.size())
        throw ParseError("'" + path + "': unknown label column '" + label_column + "'");
    if (header.size() < 2) throw ParseError("'" + path + "': no feature columns");

    Dataset ds;
    ds.cols = header.size() - 1;
    ds.provenance = Provenance::csv;
    int max_label = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto fields = split_fields(line);
        if (fields.size() != header.size())
            throw ParseError("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(header.size()) + " fields, found " +
                             std::to_string(fields.size()));
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i == label_idx) {
                int label = parse_label(fields[i], line_no, header[i]);
                ds.labels.push_back(label);
                max_label = std::max(max_label, label);
            } else {
                ds.features.push_back(parse_double(fields[i], line_no, header[i]));
            }
        }
        ++ds.rows;
    }
    if (ds.rows == 0) throw ParseError("'" + path + "': no data rows");
    ds.classes = max_label + 1;
    return ds;
}

Standardizer fit_standardizer(const Dataset& train) {
    if (train.rows == 0) throw ArgumentError("cannot standardize an empty dataset");
    Standardizer st;
    st.mean.assign(train.cols, 0.0);
    st.stddev.assign(train.cols, 0.0);
    for (std::size_t i = 0; i < train.rows; ++i) {
        auto r = train.row(i);
        for (std::size_t j = 0; j < train.cols; ++j) st.mean[j] += r[j];
    }
    for (double& m : st.mean) m /= static_cast<double>(train.rows);
    for (std::size_t i = 0; i < train.rows; ++i) {
        auto r = train.row(i);
        for (std::size_t j = 0; j < train.cols; ++j) {
            const double d = r[j] - st.mean[j];
            st.stddev[j] += d * d;
        }
    }
    for (double& v : st.stddev) {
        v = std::sqrt(v / static_cast<double>(train.rows));
        if (v < 1e-12) v = 1.0;  // constant columns pass through centered
    }
    return st;
}

void apply_standardizer(const Standardizer& st, Dataset& ds) {
    if (st.mean.size() != ds.cols || st.stddev.size() != ds.cols)
        throw ShapeError("standardizer was fitted on a different column count");
    for (std::size_t i = 0; i < ds.rows; ++i) {
        double* r = ds.features.data() + i * ds.cols;
        for (std::size_t j = 0; j < ds.cols; ++j) r[j] = (r[j] - st.mean[j]) / st.stddev[j];
    }
}

void standardize(Splits& splits) {
    Standardizer st = fit_standardizer(splits.train);
    apply_standardizer(st, splits.train);
    apply_standardizer(st, splits.validation);
    apply_standardizer(st, splits.test);
}

nnet::MaskedNetwork pretrain_source(const std::vector<nnet::LayerSpec>& source_spec,
                                    const Dataset& source_ds, int epochs, double lr,
                                    std::size_t batch_size, std::uint64_t seed) {
    nnet::validate_spec(source_spec);
    if (static_cast<int>(source_spec.back().output_size()) != source_ds.classes)
        throw ArgumentError("source network outputs " +
                            std::to_string(source_spec.back().output_size()) +
                            " classes but the source dataset has " +
                            std::to_string(source_ds.classes));
    if (epochs < 0) throw ArgumentError("pretrain epochs must be non-negative");
    if (epochs > 0 && lr <= 0.0) throw ArgumentError("pretrain learning rate must be positive");

    nnet::MaskedNetwork net = nnet::init_network(source_spec, seed);
    if (epochs > 0) {
        Rng rng(derive(seed, {kStreamPretrain}));
        nnet::train_epochs(net, as_batch(source_ds), lr, epochs, batch_size, rng);
    }
    return net;
}

nnet::MaskedNetwork retarget(const nnet::MaskedNetwork& net, int target_classes,
                             std::uint64_t head_seed) {
    if (net.layers.empty()) throw ArgumentError("cannot retarget an empty network");
    if (target_classes < 2) throw ArgumentError("target task needs at least 2 classes");
    const nnet::LayerSpec& head = net.layers.back().spec;
    if (head.kind != nnet::LayerKind::dense)
        throw ArgumentError("final layer must be dense to retarget");

    nnet::MaskedNetwork out = net;
    auto head_spec = nnet::LayerSpec::dense(head.in_dim, static_cast<std::size_t>(target_classes),
                                            head.activation);
    nnet::MaskedNetwork fresh = nnet::init_network({head_spec}, head_seed);
    out.layers.back() = std::move(fresh.layers.front());
    return out;
}

nnet::MaskedNetwork pretrain(const std::vector<nnet::LayerSpec>& source_spec,
                             const Dataset& source_ds, int target_classes, int epochs,
                             double lr, std::size_t batch_size, std::uint64_t seed) {
    nnet::MaskedNetwork source = pretrain_source(source_spec, source_ds, epochs, lr,
                                                 batch_size, seed);
    return retarget(source, target_classes, derive(seed, {kStreamHead}));
}

nnet::Batch as_batch(const Dataset& ds) {
    nnet::Batch b;
    b.inputs = ds.features;
    b.labels = ds.labels;
    b.rows = ds.rows;
    b.cols = ds.cols;
    return b;
}

}  // namespace fp::data
