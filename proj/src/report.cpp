#include "fineprune/report.hpp"

#include <cmath>
#include <sstream>

#include "fineprune/errors.hpp"

namespace fp::report {
namespace {

using nlohmann::ordered_json;

ordered_json number_or_null(double v) {
    if (!std::isfinite(v)) return nullptr;
    return v;
}

}  // namespace

std::string format_number(double v) { return nlohmann::json(v).dump(); }

ordered_json params_to_json(const surgery::PruningParams& p) {
    ordered_json layers = ordered_json::array();
    for (const auto& layer : p.layers) layers.push_back({{"a", layer.a}, {"m", layer.m}});
    return ordered_json{{"layers", std::move(layers)}, {"p0", p.p0}, {"kappa", p.kappa}};
}

surgery::PruningParams params_from_json(const ordered_json& j) {
    surgery::PruningParams p;
    for (const auto& layer : j.at("layers")) {
        surgery::LayerThresholds t;
        t.a = layer.at("a").get<double>();
        t.m = layer.at("m").get<double>();
        p.layers.push_back(t);
    }
    p.p0 = j.at("p0").get<double>();
    p.kappa = j.at("kappa").get<double>();
    return p;
}

ordered_json eval_to_json(const bo::EvalRecord& rec, std::size_t n_layers,
                          const surgery::PruningBounds& bounds) {
    surgery::PruningParams params = rec.params;
    if (params.layers.empty() && rec.x.size() == 2 * n_layers + 2)
        params = surgery::denormalize(rec.x, n_layers, bounds);
    ordered_json j;
    j["round"] = rec.round;
    j["eval_idx"] = rec.eval_idx;
    j["x"] = params_to_json(params);
    j["eps"] = number_or_null(rec.eps);
    j["s"] = number_or_null(rec.s);
    j["l"] = number_or_null(rec.l);
    j["wall_s"] = rec.wall_s;
    j["failed"] = rec.failed;
    return j;
}

ordered_json report_to_json(const finepruner::RunReport& report) {
    ordered_json j;
    j["mode"] = finepruner::mode_name(report.mode);
    j["seed"] = report.seed;
    j["lambda"] = report.lambda;
    j["incomplete"] = report.incomplete;
    j["error"] = report.error;
    j["total_weights"] = report.total_weights;
    j["total_biases"] = report.total_biases;
    j["remaining_weights"] = report.remaining_weights;
    j["final_val_acc"] = report.final_val_acc;
    j["final_test_acc"] = report.final_test_acc;
    j["compression"] = report.compression;

    ordered_json rounds = ordered_json::array();
    for (const auto& r : report.rounds) {
        ordered_json jr;
        jr["round"] = r.round;
        jr["eps_val"] = r.eps_val;
        jr["eps_test"] = r.eps_test;
        jr["s"] = r.s;
        jr["l"] = r.l;
        jr["compression"] = r.compression;
        jr["remaining_params"] = r.remaining_params;
        jr["layer_sparsity"] = r.layer_sparsity;
        jr["params"] = r.params.layers.empty() ? ordered_json(nullptr)
                                               : params_to_json(r.params);
        rounds.push_back(std::move(jr));
    }
    j["rounds"] = std::move(rounds);

    ordered_json layers = ordered_json::array();
    for (const auto& l : report.layers) {
        layers.push_back({{"name", l.name},
                          {"weights_total", l.weights_total},
                          {"weights_nonzero", l.weights_nonzero},
                          {"bias_count", l.bias_count},
                          {"sparsity", l.sparsity}});
    }
    j["layers"] = std::move(layers);
    return j;
}

finepruner::RunReport report_from_json(const ordered_json& j) {
    finepruner::RunReport report;
    report.mode = finepruner::parse_mode(j.at("mode").get<std::string>());
    report.seed = j.at("seed").get<std::uint64_t>();
    report.lambda = j.at("lambda").get<double>();
    report.incomplete = j.at("incomplete").get<bool>();
    report.error = j.at("error").get<std::string>();
    report.total_weights = j.at("total_weights").get<std::size_t>();
    report.total_biases = j.at("total_biases").get<std::size_t>();
    report.remaining_weights = j.at("remaining_weights").get<std::size_t>();
    report.final_val_acc = j.at("final_val_acc").get<double>();
    report.final_test_acc = j.at("final_test_acc").get<double>();
    report.compression = j.at("compression").get<double>();
    for (const auto& jr : j.at("rounds")) {
        finepruner::RoundResult r;
        r.round = jr.at("round").get<int>();
        r.eps_val = jr.at("eps_val").get<double>();
        r.eps_test = jr.at("eps_test").get<double>();
        r.s = jr.at("s").get<double>();
        r.l = jr.at("l").get<double>();
        r.compression = jr.at("compression").get<double>();
        r.remaining_params = jr.at("remaining_params").get<std::size_t>();
        r.layer_sparsity = jr.at("layer_sparsity").get<std::vector<double>>();
        if (!jr.at("params").is_null()) r.params = params_from_json(jr.at("params"));
        report.rounds.push_back(std::move(r));
    }
    for (const auto& jl : j.at("layers")) {
        finepruner::LayerReport l;
        l.name = jl.at("name").get<std::string>();
        l.weights_total = jl.at("weights_total").get<std::size_t>();
        l.weights_nonzero = jl.at("weights_nonzero").get<std::size_t>();
        l.bias_count = jl.at("bias_count").get<std::size_t>();
        l.sparsity = jl.at("sparsity").get<double>();
        report.layers.push_back(std::move(l));
    }
    return report;
}

void write_run_json(const finepruner::RunReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << report_to_json(report).dump(2) << '\n';
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

finepruner::RunReport load_run_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    ordered_json j;
    try {
        in >> j;
        return report_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("'" + path.string() + "': " + e.what());
    }
}

JsonlWriter::JsonlWriter(const std::filesystem::path& path, std::size_t n_layers,
                         surgery::PruningBounds bounds)
    : out_(path), n_layers_(n_layers), bounds_(bounds) {
    if (!out_) throw IoError("cannot write '" + path.string() + "'");
}

void JsonlWriter::write(const bo::EvalRecord& rec) {
    out_ << eval_to_json(rec, n_layers_, bounds_).dump() << '\n';
    out_.flush();
    if (!out_) throw IoError("failed writing eval log");
}

std::string summary_csv(const std::vector<LabeledReport>& runs) {
    std::ostringstream out;
    out << "run,mode,lambda,seed,val_acc,test_acc,parameters,compression\n";
    for (const auto& [label, report] : runs) {
        const std::size_t parameters = report.remaining_weights + report.total_biases;
        out << label << ',' << finepruner::mode_name(report.mode) << ','
            << format_number(report.lambda) << ',' << report.seed << ','
            << format_number(report.final_val_acc) << ','
            << format_number(report.final_test_acc) << ',' << parameters << ',';
        if (report.mode == finepruner::RunMode::finetune_only)
            out << "--";
        else
            out << format_number(report.compression);
        out << '\n';
    }
    return out.str();
}

std::string layers_csv(const std::vector<LabeledReport>& runs) {
    std::ostringstream out;
    out << "run,layer,weights_before,weights_after,bias,params_after,pct_pruned\n";
    for (const auto& [label, report] : runs) {
        for (const auto& l : report.layers) {
            out << label << ',' << l.name << ',' << l.weights_total << ',' << l.weights_nonzero
                << ',' << l.bias_count << ',' << l.weights_nonzero + l.bias_count << ','
                << format_number(l.sparsity * 100.0) << '\n';
        }
        const double pct =
            report.total_weights == 0
                ? 0.0
                : 100.0 * (1.0 - static_cast<double>(report.remaining_weights) /
                                     static_cast<double>(report.total_weights));
        out << label << ",total," << report.total_weights << ',' << report.remaining_weights
            << ',' << report.total_biases << ','
            << report.remaining_weights + report.total_biases << ',' << format_number(pct)
            << '\n';
    }
    return out.str();
}

std::string plotdata_csv(const finepruner::RunReport& report) {
    std::ostringstream out;
    out << "round,compression_rate,val_error\n";
    for (const auto& r : report.rounds)
        out << r.round << ',' << format_number(r.compression) << ','
            << format_number(r.eps_val) << '\n';
    return out.str();
}

}  // namespace fp::report
