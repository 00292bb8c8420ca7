#include "fineprune/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include "fineprune/errors.hpp"

namespace fp::config {
namespace {

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& want,
                            const std::string& got) {
    throw ConfigError("config key '" + key + "': expected " + want + ", got '" + got + "'");
}

double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const char* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc{} || ptr != end || v.empty()) bad_value(key, "a number", v);
    if (!std::isfinite(out)) bad_value(key, "a finite number", v);
    return out;
}

long long to_int(const std::string& key, const std::string& v) {
    long long out = 0;
    const char* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc{} || ptr != end || v.empty()) bad_value(key, "an integer", v);
    return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const char* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc{} || ptr != end || v.empty())
        bad_value(key, "an unsigned integer", v);
    return out;
}

std::size_t to_size(const std::string& key, const std::string& v) {
    long long out = to_int(key, v);
    if (out < 0) bad_value(key, "a non-negative integer", v);
    return static_cast<std::size_t>(out);
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    bad_value(key, "true/false", v);
}

std::vector<std::size_t> to_size_list(const std::string& key, const std::string& v) {
    std::vector<std::size_t> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) bad_value(key, "a comma-separated list of positive integers", v);
        std::size_t n = to_size(key, item);
        if (n == 0) bad_value(key, "positive layer widths", v);
        out.push_back(n);
    }
    if (out.empty()) bad_value(key, "a comma-separated list of positive integers", v);
    return out;
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

const std::vector<std::pair<std::string, Setter>>& key_table() {
    static const std::vector<std::pair<std::string, Setter>> table = {
        {"data.source",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             if (v != "synthetic" && v != "csv") bad_value(k, "synthetic or csv", v);
             c.data_source = v;
         }},
        {"data.csv_path",
         [](RunConfig& c, const std::string&, const std::string& v) { c.csv_path = v; }},
        {"data.label_column",
         [](RunConfig& c, const std::string&, const std::string& v) { c.label_column = v; }},
        {"data.classes",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.classes = static_cast<int>(to_int(k, v));
         }},
        {"data.source_classes",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.source_classes = static_cast<int>(to_int(k, v));
         }},
        {"data.per_class",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.per_class = static_cast<int>(to_int(k, v));
         }},
        {"data.dims",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.dims = static_cast<int>(to_int(k, v));
         }},
        {"data.spread",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.spread = to_double(k, v);
         }},
        {"data.ratio_train",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.ratios[0] = to_double(k, v);
         }},
        {"data.ratio_val",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.ratios[1] = to_double(k, v);
         }},
        {"data.ratio_test",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.ratios[2] = to_double(k, v);
         }},
        {"net.hidden",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.hidden = to_size_list(k, v);
         }},
        {"pretrain.epochs",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.pretrain_epochs = static_cast<int>(to_int(k, v));
         }},
        {"pretrain.lr",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.pretrain_lr = to_double(k, v);
         }},
        {"pretrain.batch_size",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.pretrain_batch_size = to_size(k, v);
         }},
        {"train.lr",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.fp.lr = to_double(k, v);
         }},
        {"train.init_epochs",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.fp.init_epochs = static_cast<int>(to_int(k, v));
         }},
        {"train.ft_epochs",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.fp.ft_epochs = static_cast<int>(to_int(k, v));
         }},
        {"train.eval_epochs",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.fp.eval_epochs = static_cast<int>(to_int(k, v));
         }},
        {"train.batch_size",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.fp.batch_size = to_size(k, v);
         }},
        {"prune.lambda",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.fp.lambda = to_double(k, v);
         }},
        {"prune.a_max",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.fp.bounds.a_max = to_double(k, v);
         }},
        {"prune.m_max",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.fp.bounds.m_max = to_double(k, v);
         }},
        {"prune.p0_min",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.fp.bounds.p0_min = to_double(k, v);
         }},
        {"prune.p0_max",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.fp.bounds.p0_max = to_double(k, v);
         }},
        {"prune.kappa_max",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.fp.bounds.kappa_max = to_double(k, v);
         }},
        {"prune.cadence",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             if (v == "once")
                 c.fp.cadence = finepruner::MaskCadence::once;
             else if (v == "per_epoch")
                 c.fp.cadence = finepruner::MaskCadence::per_epoch;
             else
                 bad_value(k, "once or per_epoch", v);
         }},
        {"prune.tau",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.fp.tau = to_double(k, v);
         }},
        {"bo.budget",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.fp.bo.budget = to_size(k, v);
         }},
        {"bo.n_init",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.fp.n_init = to_size(k, v);
         }},
        {"bo.pool_size",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.fp.bo.pool_size = to_size(k, v);
         }},
        {"bo.perturbations",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.fp.bo.incumbent_perturbations = to_size(k, v);
         }},
        {"bo.perturb_sigma",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.fp.bo.perturb_sigma = to_double(k, v);
         }},
        {"bo.ei_tol",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.fp.bo.ei_tol = to_double(k, v);
         }},
        {"bo.patience",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.fp.bo.patience = to_size(k, v);
         }},
        {"run.max_rounds",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.fp.max_rounds = static_cast<int>(to_int(k, v));
         }},
        {"run.seed",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.fp.seed = to_u64(k, v);
             c.seed_from_config = true;
         }},
        {"run.l_tol",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.fp.outer_l_tol = to_double(k, v);
         }},
        {"run.s_tol",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.fp.outer_s_tol = to_double(k, v);
         }},
        {"log.timings",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.fp.log_timings = to_bool(k, v);
         }},
        {"kernels.backend",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             if (v != "auto" && v != "scalar" && v != "avx2" && v != "neon")
                 bad_value(k, "auto, scalar, avx2, or neon", v);
             c.kernels_backend = v;
         }},
    };
    return table;
}

std::string suffix_after_dot(const std::string& key) {
    const auto pos = key.rfind('.');
    return pos == std::string::npos ? key : key.substr(pos + 1);
}

[[noreturn]] void unknown_key(const std::string& key) {
    std::string best;
    std::size_t best_dist = std::numeric_limits<std::size_t>::max();
    for (const auto& [known, setter] : key_table()) {
        const std::size_t d = std::min(edit_distance(key, known),
                                       edit_distance(suffix_after_dot(key), suffix_after_dot(known)));
        if (d < best_dist) {
            best_dist = d;
            best = known;
        }
    }
    throw ConfigError("unknown config key '" + key + "'; did you mean '" + best + "'?");
}

}  // namespace

std::vector<std::string> known_keys() {
    std::vector<std::string> keys;
    keys.reserve(key_table().size());
    for (const auto& [key, setter] : key_table()) keys.push_back(key);
    return keys;
}

RunConfig config_from_kv(const std::vector<std::pair<std::string, std::string>>& kv) {
    RunConfig cfg;
    for (const auto& [key, value] : kv) {
        const auto& table = key_table();
        auto it = std::find_if(table.begin(), table.end(),
                               [&](const auto& entry) { return entry.first == key; });
        if (it == table.end()) unknown_key(key);
        it->second(cfg, key, value);
    }
    cfg.validate();
    return cfg;
}

RunConfig parse_config(const std::string& path, const std::vector<std::string>& overrides) {
    std::vector<std::pair<std::string, std::string>> kv;

    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open config '" + path + "'");
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (const auto hash = line.find('#'); hash != std::string::npos)
                line.resize(hash);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[')
                throw ConfigError("config line " + std::to_string(line_no) +
                                  ": sections are not used; write dotted keys like bo.budget");
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line " + std::to_string(line_no) +
                                  ": expected key = value");
            kv.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
    }

    for (const std::string& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--set expects key=value, got '" + ov + "'");
        kv.emplace_back(trim(ov.substr(0, eq)), trim(ov.substr(eq + 1)));
    }

    return config_from_kv(kv);
}

void RunConfig::validate() const {
    if (data_source == "csv" && csv_path.empty())
        throw ConfigError("data.csv_path is required when data.source = csv");
    if (data_source == "synthetic") {
        if (classes < 2) throw ConfigError("data.classes must be >= 2");
        if (source_classes < 2) throw ConfigError("data.source_classes must be >= 2");
        if (per_class < 4) throw ConfigError("data.per_class must be >= 4 (split needs 4 rows)");
        if (dims < 2) throw ConfigError("data.dims must be >= 2");
        if (!(spread >= 0.0)) throw ConfigError("data.spread must be >= 0");
    }
    const double total = ratios[0] + ratios[1] + ratios[2];
    if (std::abs(total - 1.0) > 1e-9)
        throw ConfigError("data.ratio_train/ratio_val/ratio_test must sum to 1");
    for (double r : ratios)
        if (r < 0.0) throw ConfigError("data ratios must be non-negative");
    if (hidden.empty()) throw ConfigError("net.hidden must list at least one layer width");
    if (pretrain_epochs < 0) throw ConfigError("pretrain.epochs must be >= 0");
    if (pretrain_epochs > 0 && !(pretrain_lr > 0.0))
        throw ConfigError("pretrain.lr must be positive");
    if (pretrain_batch_size < 1) throw ConfigError("pretrain.batch_size must be >= 1");
    fp.validate();
}

}  // namespace fp::config
