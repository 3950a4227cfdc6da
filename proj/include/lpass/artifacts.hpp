#pragma once

// Text artifacts exchanged between subcommands. Tabular files are CSV with a
// header row, preceded by `# key: value` lines describing how they were made.

#include <lpass/estimator.hpp>
#include <lpass/metrics.hpp>
#include <lpass/probe.hpp>
#include <lpass/pruning.hpp>

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace lpass {

inline constexpr std::string_view tool_version = "0.1.0";

/// Ordered `key: value` pairs written as comment lines at the top of a file.
using ArtifactHeader = std::vector<std::pair<std::string, std::string>>;

std::string format_number(double v);

struct CsvTable {
    ArtifactHeader header;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(std::string_view name) const;  ///< throws if absent
    std::string header_value(std::string_view key) const;  ///< "" if absent
};

void write_csv(std::ostream& out, const CsvTable& table);
CsvTable read_csv(std::istream& in);
CsvTable read_csv(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& contents);

struct MetricsRow {
    std::string id;
    FunctionMetrics metrics;
};

CsvTable metrics_table(const std::vector<MetricsRow>& rows, ArtifactHeader header);
std::vector<MetricsRow> parse_metrics_table(const CsvTable& table);

/// Schemes keyed by scope: a dataset id, or "*" for a global scheme.
using SchemeSet = std::map<std::pair<std::string, Feature>, BinningScheme>;

CsvTable scheme_table(const SchemeSet& schemes, ArtifactHeader header);
SchemeSet parse_scheme_table(const CsvTable& table);
/// The scheme for (dataset, feature), falling back to the global "*" scope.
const BinningScheme& find_scheme(const SchemeSet& schemes, const std::string& dataset, Feature feature);

CsvTable curve_table(const LayerAccuracyCurve& curve, ArtifactHeader header);
LayerAccuracyCurve parse_curve_table(const CsvTable& table);

std::vector<EffectivenessRecord> parse_effectiveness_table(const CsvTable& table);

std::string beta_table_json(const BetaTable& table, const ArtifactHeader& header);
BetaTable parse_beta_table_json(const std::string& text);

std::string prune_plan_json(const PrunePlan& plan, const ArtifactHeader& header);

/// Wide |Err| matrix in percent with one decimal: a row per held-out dataset and a Mean row per feature.
CsvTable loocv_error_matrix(const LooResult& result, ArtifactHeader header);
/// Wide beta matrix in percent with one decimal, a row per knowledge set plus an "All D" row
/// fitted on every dataset.
CsvTable loocv_beta_matrix(const LooResult& result, std::span<const KnowledgeEntry> all, ArtifactHeader header);
/// Long format with signed errors alongside their magnitudes.
CsvTable loocv_signed_table(const LooResult& result, ArtifactHeader header);

} // namespace lpass
