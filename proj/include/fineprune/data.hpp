#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fineprune/nnet.hpp"

namespace fp::data {

enum class Provenance { synthetic, csv };

// Immutable feature matrix (row-major) with integer labels in [0, classes).
struct Dataset {
    std::vector<double> features;
    std::vector<int> labels;
    std::size_t rows = 0, cols = 0;
    int classes = 0;
    Provenance provenance = Provenance::synthetic;

    std::span<const double> row(std::size_t i) const {
        return {features.data() + i * cols, cols};
    }
};

struct Splits {
    Dataset train, validation, test;
};

struct SplitIndices {
    std::vector<std::size_t> train, validation, test;
};

// Gaussian blobs: class centers sit evenly spaced on the unit circle in the
// first two feature dimensions (seeded phase); all dimensions carry
// isotropic noise with deviation `spread`.
Dataset generate_synthetic(int classes, int per_class, int dims, double spread,
                           std::uint64_t seed);

// Stratified row indices: each class is shuffled independently and sliced by
// the ratios. Throws ArgumentError when ratios do not sum to 1 (1e-9) or a
// class has fewer than 4 rows.
SplitIndices split_indices(const Dataset& ds, const std::array<double, 3>& ratios,
                           std::uint64_t seed);
Splits split(const Dataset& ds, const std::array<double, 3>& ratios, std::uint64_t seed);

// Strict CSV reader: header row required, comma separated, decimal point
// only. Errors name the offending line and column.
Dataset load_csv(const std::string& path, const std::string& label_column);

// Per-column affine transform fitted on the training split and applied
// unchanged to validation/test.
struct Standardizer {
    std::vector<double> mean, stddev;
};

Standardizer fit_standardizer(const Dataset& train);
void apply_standardizer(const Standardizer& st, Dataset& ds);
void standardize(Splits& splits);

// Trains an initialized network on the source task (no head replacement).
nnet::MaskedNetwork pretrain_source(const std::vector<nnet::LayerSpec>& source_spec,
                                    const Dataset& source_ds, int epochs, double lr,
                                    std::size_t batch_size, std::uint64_t seed);

// Replaces the final dense layer with a freshly initialized head of
// `target_classes` outputs; earlier layers are untouched.
nnet::MaskedNetwork retarget(const nnet::MaskedNetwork& net, int target_classes,
                             std::uint64_t head_seed);

// pretrain_source followed by retarget: the transfer-learning starting
// point (broad source task, narrow target head).
nnet::MaskedNetwork pretrain(const std::vector<nnet::LayerSpec>& source_spec,
                             const Dataset& source_ds, int target_classes, int epochs,
                             double lr, std::size_t batch_size, std::uint64_t seed);

nnet::Batch as_batch(const Dataset& ds);

}  // namespace fp::data
