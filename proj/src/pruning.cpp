#include <lpass/error.hpp>
#include <lpass/pruning.hpp>
#include <lpass/random.hpp>

#include <algorithm>
#include <cmath>

namespace lpass {

LossCurve loss_curve(std::span<const double> average_accuracy, std::string dataset_id, Feature feature)
{
    if (average_accuracy.empty()) throw Error("loss_curve: empty accuracy curve");
    const double best = *std::max_element(average_accuracy.begin(), average_accuracy.end());
    LossCurve out{std::move(dataset_id), feature, {}};
    for (double acc : average_accuracy) out.losses.push_back(best - acc);
    return out;
}

LossCurve loss_curve(const LayerAccuracyCurve& curve)
{
    const auto averages = curve.averages();
    return loss_curve(averages, curve.dataset_id, curve.feature);
}

CutoffDecision select_kcut(std::span<const LossCurve> curves)
{
    if (curves.empty()) throw Error("select_kcut: no curves");
    const std::size_t layers = curves.front().losses.size();
    if (layers == 0) throw Error("select_kcut: empty loss curve");

    CutoffDecision d;
    d.total_score.assign(layers, 0.0);
    for (const auto& c : curves) {
        if (c.losses.size() != layers) {
            throw Error("select_kcut: curve " + c.dataset_id + "/" + std::string(to_string(c.feature)) + " has " +
                        std::to_string(c.losses.size()) + " layers, expected " + std::to_string(layers));
        }
        for (std::size_t k = 0; k < layers; ++k) d.total_score[k] += std::abs(c.losses[k]);
        d.curve_ids.push_back(c.dataset_id + "/" + std::string(to_string(c.feature)));
    }
    // min_element returns the first minimum, which is the smallest-k tie-break.
    d.k_cut = static_cast<std::uint32_t>(std::min_element(d.total_score.begin(), d.total_score.end()) - d.total_score.begin());
    return d;
}

BaselineCutpoints baseline_cutpoints(std::uint32_t k_cut, std::uint32_t total_layers, seed_t seed)
{
    if (k_cut == 0 || k_cut >= total_layers) {
        throw Error("baseline_cutpoints: need 0 < k_cut < total_layers (got k_cut=" + std::to_string(k_cut) +
                    ", total=" + std::to_string(total_layers) + ")");
    }
    BaselineCutpoints b;
    b.half_cut = k_cut / 2;

    std::vector<std::uint32_t> candidates;
    for (std::uint32_t k = 1; k <= total_layers; ++k) candidates.push_back(k);
    Rng rng(seed);
    rng.shuffle(std::span(candidates));
    b.random_removed.assign(candidates.begin(), candidates.begin() + (total_layers - k_cut));
    std::sort(b.random_removed.begin(), b.random_removed.end());
    return b;
}

PrunePlan prune_plan(std::uint32_t k_cut, std::uint32_t total_layers)
{
    if (k_cut > total_layers) {
        throw Error("prune_plan: k_cut " + std::to_string(k_cut) + " exceeds " + std::to_string(total_layers) + " layers");
    }
    PrunePlan p{k_cut, total_layers, {}, {}};
    for (std::uint32_t k = 0; k <= total_layers; ++k) (k <= k_cut ? p.retained : p.removed).push_back(k);
    return p;
}

} // namespace lpass
