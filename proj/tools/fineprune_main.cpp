#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fineprune/config.hpp"
#include "fineprune/data.hpp"
#include "fineprune/errors.hpp"
#include "fineprune/finepruner.hpp"
#include "fineprune/kernels.hpp"
#include "fineprune/oracles.hpp"
#include "fineprune/report.hpp"

namespace fs = std::filesystem;

namespace {

std::uint64_t parse_env_seed(const char* text) {
    std::uint64_t out = 0;
    const std::string s(text);
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, out);
    if (ec != std::errc{} || ptr != end || s.empty())
        throw fp::ConfigError("FINEPRUNE_SEED must be an unsigned integer, got '" + s + "'");
    return out;
}

// Build the network spec from config: input width -> hidden relu layers ->
// identity classifier head.
std::vector<fp::nnet::LayerSpec> make_spec(std::size_t input, const std::vector<std::size_t>& hidden,
                                           int classes) {
    std::vector<fp::nnet::LayerSpec> spec;
    std::size_t in = input;
    for (std::size_t width : hidden) {
        spec.push_back(fp::nnet::LayerSpec::dense(in, width));
        in = width;
    }
    spec.push_back(fp::nnet::LayerSpec::dense(in, static_cast<std::size_t>(classes),
                                              fp::nnet::Activation::identity));
    return spec;
}

struct PreparedRun {
    fp::finepruner::SplitBatches batches;
    fp::nnet::MaskedNetwork net;
};

// Datasets plus the pretrained, head-replaced starting network.
PreparedRun prepare(const fp::config::RunConfig& cfg) {
    const std::uint64_t seed = cfg.fp.seed;
    PreparedRun out;

    fp::data::Splits splits;
    int target_classes = cfg.classes;
    std::size_t input_dims = 0;

    if (cfg.data_source == "csv") {
        fp::data::Dataset ds = fp::data::load_csv(cfg.csv_path, cfg.label_column);
        target_classes = ds.classes;
        input_dims = ds.cols;
        splits = fp::data::split(ds, cfg.ratios, fp::derive(seed, {fp::kStreamSplit}));
        fp::data::standardize(splits);
    } else {
        fp::data::Dataset ds =
            fp::data::generate_synthetic(cfg.classes, cfg.per_class, cfg.dims, cfg.spread,
                                         fp::derive(seed, {fp::kStreamData, 1}));
        input_dims = ds.cols;
        splits = fp::data::split(ds, cfg.ratios, fp::derive(seed, {fp::kStreamSplit}));
    }

    // The "broader domain" the starting network is pretrained on: more
    // classes, same feature space, independently placed blobs.
    fp::data::Dataset source = fp::data::generate_synthetic(
        cfg.source_classes, cfg.per_class, static_cast<int>(input_dims), cfg.spread,
        fp::derive(seed, {fp::kStreamData, 0}));

    const auto source_spec = make_spec(input_dims, cfg.hidden, cfg.source_classes);
    out.net = fp::data::pretrain(source_spec, source, target_classes, cfg.pretrain_epochs,
                                 cfg.pretrain_lr, cfg.pretrain_batch_size, seed);

    out.batches.train = fp::data::as_batch(splits.train);
    out.batches.validation = fp::data::as_batch(splits.validation);
    out.batches.test = fp::data::as_batch(splits.test);
    return out;
}

int do_run(const std::string& config_path, const std::string& mode_name,
           const std::string& out_dir, const std::vector<std::string>& overrides,
           bool seed_given, std::uint64_t cli_seed) {
    fp::config::RunConfig cfg = fp::config::parse_config(config_path, overrides);

    if (seed_given)
        cfg.fp.seed = cli_seed;
    else if (!cfg.seed_from_config)
        if (const char* env = std::getenv("FINEPRUNE_SEED")) cfg.fp.seed = parse_env_seed(env);

    if (!fp::kernels::set_backend(cfg.kernels_backend))
        throw fp::ConfigError("kernels.backend: '" + cfg.kernels_backend +
                              "' is not available on this CPU");

    const fp::finepruner::RunMode mode = fp::finepruner::parse_mode(mode_name);

    // Fail on an unwritable output directory before any compute.
    const fs::path out(out_dir);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw fp::IoError("cannot create output directory '" + out.string() + "'");
    {
        std::ofstream probe(out / "run.json");
        if (!probe) throw fp::IoError("output directory '" + out.string() + "' is not writable");
    }

    PreparedRun prepared = prepare(cfg);
    const std::size_t n_layers = prepared.net.layers.size();

    fp::report::JsonlWriter jsonl(out / "evals.jsonl", n_layers, cfg.fp.bounds);
    fp::bo::RecordSink sink = [&jsonl](const fp::bo::EvalRecord& rec) { jsonl.write(rec); };

    fp::finepruner::RunReport report =
        fp::finepruner::run(mode, cfg.fp, prepared.net, prepared.batches, sink);

    fp::report::write_run_json(report, out / "run.json");
    fp::nnet::save_checkpoint(prepared.net, out / "final.fpn1");

    if (report.incomplete) {
        std::cerr << "run incomplete: " << report.error << "\n";
        return 1;
    }
    std::cout << "mode=" << fp::finepruner::mode_name(report.mode) << " seed=" << report.seed
              << " val_acc=" << fp::report::format_number(report.final_val_acc)
              << " test_acc=" << fp::report::format_number(report.final_test_acc)
              << " compression=" << fp::report::format_number(report.compression) << "\n";
    return 0;
}

fp::finepruner::RunReport load_report_arg(const std::string& arg) {
    fs::path p(arg);
    if (fs::is_directory(p)) p /= "run.json";
    return fp::report::load_run_json(p);
}

int do_report(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
    std::vector<fp::report::LabeledReport> runs;
    runs.reserve(run_dirs.size());
    for (const std::string& dir : run_dirs)
        runs.emplace_back(fs::path(dir).filename().string(), load_report_arg(dir));

    const std::string summary = fp::report::summary_csv(runs);
    const std::string layers = fp::report::layers_csv(runs);

    const fs::path out(out_dir);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw fp::IoError("cannot create output directory '" + out.string() + "'");
    for (const auto& [name, text] :
         {std::pair<std::string, const std::string&>{"summary.csv", summary},
          std::pair<std::string, const std::string&>{"layers.csv", layers}}) {
        std::ofstream f(out / name);
        if (!f) throw fp::IoError("cannot write '" + (out / name).string() + "'");
        f << text;
    }

    std::cout << summary << "\n" << layers;
    return 0;
}

int do_plotdata(const std::string& run_dir) {
    std::cout << fp::report::plotdata_csv(load_report_arg(run_dir));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Joint fine-tuning and compression of small dense networks"};
    app.require_subcommand(0, 1);

    std::string config_path, out_dir = "out", mode = "fineprune";
    std::vector<std::string> overrides, run_dirs;
    std::string report_out = ".";
    std::uint64_t cli_seed = 0;

    CLI::App* run_cmd = app.add_subcommand("run", "Execute a pruning or baseline run");
    run_cmd->add_option("--config", config_path, "Config file of dotted key = value lines");
    run_cmd->add_option("--mode", mode, "fineprune | finetune_only | independent");
    run_cmd->add_option("--out", out_dir, "Output directory for run artifacts");
    CLI::Option* seed_opt = run_cmd->add_option("--seed", cli_seed, "Run seed");
    run_cmd->add_option("--set", overrides, "Config override key=value (repeatable)");

    CLI::App* report_cmd = app.add_subcommand("report", "Tabulate one or more finished runs");
    report_cmd->add_option("runs", run_dirs, "Run directories (containing run.json)")
        ->required()
        ->expected(-1);
    report_cmd->add_option("--out", report_out, "Directory for summary.csv / layers.csv");

    CLI::App* plot_cmd = app.add_subcommand("plotdata", "Per-round compression/error CSV");
    std::string plot_dir;
    plot_cmd->add_option("run", plot_dir, "Run directory (containing run.json)")->required();

    CLI::App* selftest_cmd = app.add_subcommand("selftest", "Run the reference-oracle suites");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // option misuse is a configuration error
    }

    try {
        if (run_cmd->parsed())
            return do_run(config_path, mode, out_dir, overrides, seed_opt->count() > 0, cli_seed);
        if (report_cmd->parsed()) return do_report(run_dirs, report_out);
        if (plot_cmd->parsed()) return do_plotdata(plot_dir);
        if (selftest_cmd->parsed()) return fp::oracles::run_selftest(std::cout) == 0 ? 0 : 1;
        std::cout << app.help();
        return 0;
    } catch (const fp::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
