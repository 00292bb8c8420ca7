#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fineprune/finepruner.hpp"

namespace fp::config {

// Everything a run needs, assembled from flat dotted keys
// (e.g. "bo.budget = 50") with later assignments winning.
struct RunConfig {
    // data.*
    std::string data_source = "synthetic";  // synthetic | csv
    std::string csv_path;
    std::string label_column = "label";
    int classes = 3;         // target task classes
    int source_classes = 6;  // broader pretraining task classes
    int per_class = 100;
    int dims = 2;
    double spread = 0.15;
    std::array<double, 3> ratios{0.5, 0.25, 0.25};

    // net.*
    std::vector<std::size_t> hidden{64, 64};

    // pretrain.*
    int pretrain_epochs = 300;
    double pretrain_lr = 0.05;
    std::size_t pretrain_batch_size = 16;

    // train.* / prune.* / bo.* / run.* / log.*
    finepruner::FinePruneConfig fp;

    // kernels.*
    std::string kernels_backend = "auto";

    bool seed_from_config = false;  // run.seed was set explicitly

    // Cross-field checks beyond FinePruneConfig::validate (which is also
    // called). Throws ConfigError naming the offending key.
    void validate() const;
};

// Key/value view after file parsing and --set overrides, in application
// order. Unknown keys throw ConfigError with a nearest-key suggestion.
RunConfig config_from_kv(const std::vector<std::pair<std::string, std::string>>& kv);

// Reads `key = value` lines ('#' starts a comment). `overrides` are
// "key=value" strings applied after the file. An empty path skips the file
// and applies defaults + overrides only.
RunConfig parse_config(const std::string& path, const std::vector<std::string>& overrides);

// All recognized keys, for help output and suggestion tests.
std::vector<std::string> known_keys();

}  // namespace fp::config
