#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fineprune/bo.hpp"
#include "fineprune/finepruner.hpp"
#include "fineprune/surgery.hpp"

namespace fp::report {

// Shortest decimal that parses back to the same double (nlohmann's dtoa),
// shared by JSON and CSV output so both round-trip exactly.
std::string format_number(double v);

nlohmann::ordered_json params_to_json(const surgery::PruningParams& p);
surgery::PruningParams params_from_json(const nlohmann::ordered_json& j);

// One evals.jsonl line: {"round","eval_idx","x":{...},"eps","s","l",
// "wall_s","failed"}. Failed records carry null eps/s/l; their x is
// reconstructed from the normalized point.
nlohmann::ordered_json eval_to_json(const bo::EvalRecord& rec, std::size_t n_layers,
                                    const surgery::PruningBounds& bounds);

nlohmann::ordered_json report_to_json(const finepruner::RunReport& report);
finepruner::RunReport report_from_json(const nlohmann::ordered_json& j);

void write_run_json(const finepruner::RunReport& report, const std::filesystem::path& path);
// Throws IoError on a missing file and ParseError (naming the path) on
// malformed content.
finepruner::RunReport load_run_json(const std::filesystem::path& path);

// Append-only eval log, one JSON object per line, flushed per line.
class JsonlWriter {
  public:
    JsonlWriter(const std::filesystem::path& path, std::size_t n_layers,
                surgery::PruningBounds bounds);
    void write(const bo::EvalRecord& rec);

  private:
    std::ofstream out_;
    std::size_t n_layers_;
    surgery::PruningBounds bounds_;
};

using LabeledReport = std::pair<std::string, finepruner::RunReport>;

// Mode comparison across runs: val/test accuracy, remaining parameters,
// compression ("--" for finetune_only, which never prunes).
std::string summary_csv(const std::vector<LabeledReport>& runs);

// Per-layer breakdown per run, with a totals row whose remaining-parameter
// sum matches the summary table.
std::string layers_csv(const std::vector<LabeledReport>& runs);

// One row per outer round: round, compression_rate, val_error.
std::string plotdata_csv(const finepruner::RunReport& report);

}  // namespace fp::report
