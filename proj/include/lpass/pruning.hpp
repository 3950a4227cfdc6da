#pragma once

#include <lpass/metrics.hpp>
#include <lpass/probe.hpp>
#include <lpass/types.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lpass {

/// Accuracy lost at each layer relative to the best layer of one curve.
struct LossCurve {
    std::string dataset_id;
    Feature feature = Feature::cc;
    std::vector<double> losses;  ///< index k = layer k; min is exactly 0
};

LossCurve loss_curve(const LayerAccuracyCurve& curve);
LossCurve loss_curve(std::span<const double> average_accuracy, std::string dataset_id = {}, Feature feature = Feature::cc);

struct CutoffDecision {
    std::uint32_t k_cut = 0;
    std::vector<double> total_score;          ///< Σ|loss_k| over curves, per layer
    std::vector<std::string> curve_ids;       ///< "<dataset>/<feature>" per contributing curve
};

/// Layer minimizing the summed absolute loss over all curves; ties go to the
/// smallest layer. Throws on an empty bundle or mismatched layer counts.
CutoffDecision select_kcut(std::span<const LossCurve> curves);

struct BaselineCutpoints {
    std::uint32_t half_cut = 0;
    std::vector<std::uint32_t> random_removed;  ///< ascending, drawn from 1..total_layers
};

/// Corroboration baselines: floor(k_cut / 2) as an alternative cut-off and a
/// seeded random set of as many layers as k_cut pruning removes.
BaselineCutpoints baseline_cutpoints(std::uint32_t k_cut, std::uint32_t total_layers, seed_t seed);

struct PrunePlan {
    std::uint32_t k_cut = 0;
    std::uint32_t total_layers = 0;          ///< transformer blocks, excluding the embedding layer
    std::vector<std::uint32_t> retained;     ///< 0..k_cut
    std::vector<std::uint32_t> removed;      ///< k_cut+1..total_layers
};

PrunePlan prune_plan(std::uint32_t k_cut, std::uint32_t total_layers);

} // namespace lpass
