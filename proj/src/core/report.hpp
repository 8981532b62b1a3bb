#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "evaluate.hpp"
#include "metrics.hpp"
#include "trainer.hpp"

namespace etdpc::evalrep {

// JSON carries full numeric precision and round-trips losslessly; markdown
// renders 2-decimal display values. Reference rows (published baseline
// numbers) are merged from a provided file, never fabricated.

nlohmann::json report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& j);

nlohmann::json history_to_json(const train::TrainHistory& history);

using NamedReports = std::vector<std::pair<std::string, const MetricsReport*>>;

// Per-category comparison in the row layout Category, then P/R/F1 per case:
// column count is 1 + 3 * cases.
std::string case_comparison_csv(const NamedReports& cases);
std::string case_comparison_markdown(const NamedReports& cases,
                                     const nlohmann::json* reference = nullptr);

// Baseline-comparison table (accuracy / macro-F1); reference rows come from
// the reference file's "baselines" array.
std::string baseline_comparison_markdown(const std::string& run_name, double accuracy,
                                         double macro_f1, const nlohmann::json* reference);

std::string sweep_csv(const SweepResult& sweep);
nlohmann::json sweep_to_json(const SweepResult& sweep);

nlohmann::json ablation_to_json(const AblationResult& ablation);
std::string ablation_markdown(const AblationResult& ablation);

void write_text_file(const std::string& path, const std::string& content);
nlohmann::json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const nlohmann::json& j);

}  // namespace etdpc::evalrep
