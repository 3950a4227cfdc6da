#pragma once

#include <lpass/metrics.hpp>
#include <lpass/probe.hpp>

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lpass {

enum class Metric { precision, recall, f1, accuracy };

std::string_view to_string(Metric m);
Metric parse_metric(std::string_view name);

/// Measured detection effectiveness of a fine-tuned (possibly compressed)
/// model on one dataset.
struct EffectivenessRecord {
    std::string dataset_id;
    std::string config_tag = "baseline";
    std::map<Metric, double> metrics;  ///< each in [0, 1]

    void validate() const;
};

enum class LayerPolicy { best_layer, at_kcut };

std::string_view to_string(LayerPolicy p);
LayerPolicy parse_layer_policy(std::string_view name);

/// The probe accuracy that stands in for a dataset.
struct ProbeSummary {
    std::string dataset_id;
    Feature feature = Feature::cc;
    double acc_lp = 0.0;
    LayerPolicy layer_policy = LayerPolicy::best_layer;
    std::uint32_t layer_used = 0;

    void validate() const;
};

/// best_layer: highest average accuracy (smallest layer on ties);
/// at_kcut: the accuracy at the given cut-off layer.
ProbeSummary summarize_curve(const LayerAccuracyCurve& curve,
                             LayerPolicy policy,
                             std::optional<std::uint32_t> k_cut = std::nullopt);

struct KnowledgeEntry {
    EffectivenessRecord effectiveness;
    ProbeSummary probe;
};

struct BetaKey {
    Feature feature;
    std::string config_tag;
    Metric metric;

    friend auto operator<=>(const BetaKey&, const BetaKey&) = default;
};

struct BetaTable {
    std::map<BetaKey, double> entries;     ///< each in [-1, 1]
    std::vector<std::string> provenance;   ///< contributing dataset ids, sorted

    double at(const BetaKey& key) const;
};

/// beta(feature, config, metric) = mean over entries of (metric - acc_lp).
BetaTable compute_beta(std::span<const KnowledgeEntry> knowledge);

struct EstimationReport {
    std::string dataset_id;
    Feature feature = Feature::cc;
    std::string config_tag;
    LayerPolicy layer_policy = LayerPolicy::best_layer;
    std::uint32_t layer_used = 0;
    std::map<Metric, double> estimate;  ///< clamp(acc_lp + beta, 0, 1)
};

EstimationReport estimate(const ProbeSummary& summary,
                          const BetaTable& betas,
                          const std::string& config_tag,
                          std::span<const Metric> metrics);

/// Signed Err = estimate - measured for every estimated metric.
std::map<Metric, double> estimation_error(const EstimationReport& report, const EffectivenessRecord& truth);

struct LooRow {
    Feature feature;
    std::string config_tag;
    std::vector<std::string> knowledge_datasets;
    std::string held_out;
    std::map<Metric, double> beta;
    std::map<Metric, double> estimate;
    std::map<Metric, double> error;  ///< signed
};

struct LooMean {
    Feature feature;
    std::string config_tag;
    std::map<Metric, double> mean_abs_error;
};

struct LooResult {
    std::vector<LooRow> rows;    ///< sorted by feature, config, held-out dataset
    std::vector<LooMean> means;  ///< one per (feature, config)
};

/// For every (feature, config) with at least three datasets, holds each
/// dataset out in turn, fits beta on the rest and scores the estimate.
LooResult leave_one_out(std::span<const KnowledgeEntry> all);

} // namespace lpass
