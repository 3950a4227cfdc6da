#include <lpass/error.hpp>
#include <lpass/estimator.hpp>

#include <algorithm>
#include <cmath>
#include <set>

namespace lpass {

std::string_view to_string(Metric m)
{
    switch (m) {
    case Metric::precision: return "precision";
    case Metric::recall: return "recall";
    case Metric::f1: return "f1";
    case Metric::accuracy: return "accuracy";
    }
    return "precision";
}

Metric parse_metric(std::string_view name)
{
    if (name == "precision") return Metric::precision;
    if (name == "recall") return Metric::recall;
    if (name == "f1") return Metric::f1;
    if (name == "accuracy") return Metric::accuracy;
    throw Error("unknown metric '" + std::string(name) + "'");
}

std::string_view to_string(LayerPolicy p) { return p == LayerPolicy::best_layer ? "best_layer" : "at_kcut"; }

LayerPolicy parse_layer_policy(std::string_view name)
{
    if (name == "best_layer") return LayerPolicy::best_layer;
    if (name == "at_kcut") return LayerPolicy::at_kcut;
    throw Error("unknown layer policy '" + std::string(name) + "'");
}

namespace {
bool in_unit_interval(double v) { return v >= 0.0 && v <= 1.0; }
} // namespace

void EffectivenessRecord::validate() const
{
    for (const auto& [m, v] : metrics) {
        if (!in_unit_interval(v)) {
            throw Error("effectiveness " + dataset_id + "/" + config_tag + ": " + std::string(to_string(m)) +
                        " outside [0, 1]");
        }
    }
}

void ProbeSummary::validate() const
{
    if (!in_unit_interval(acc_lp)) throw Error("probe summary " + dataset_id + ": accuracy outside [0, 1]");
}

ProbeSummary summarize_curve(const LayerAccuracyCurve& curve, LayerPolicy policy, std::optional<std::uint32_t> k_cut)
{
    if (curve.layers.empty()) throw Error("summarize_curve: empty curve");
    ProbeSummary s;
    s.dataset_id = curve.dataset_id;
    s.feature = curve.feature;
    s.layer_policy = policy;
    if (policy == LayerPolicy::best_layer) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < curve.layers.size(); ++k) {
            if (curve.layers[k].average > curve.layers[best].average) best = k;
        }
        s.layer_used = static_cast<std::uint32_t>(best);
    } else {
        if (!k_cut) throw Error("summarize_curve: at_kcut policy needs a cut-off layer");
        if (*k_cut >= curve.layers.size()) throw Error("summarize_curve: k_cut beyond the curve");
        s.layer_used = *k_cut;
    }
    s.acc_lp = curve.layers[s.layer_used].average;
    s.validate();
    return s;
}

double BetaTable::at(const BetaKey& key) const
{
    const auto it = entries.find(key);
    if (it == entries.end()) {
        throw Error("no beta for feature " + std::string(to_string(key.feature)) + ", config " + key.config_tag +
                    ", metric " + std::string(to_string(key.metric)));
    }
    return it->second;
}

BetaTable compute_beta(std::span<const KnowledgeEntry> knowledge)
{
    if (knowledge.empty()) throw Error("compute_beta: empty knowledge base");

    std::map<BetaKey, std::pair<double, std::size_t>> sums;
    std::set<std::string> datasets;
    for (const auto& e : knowledge) {
        e.effectiveness.validate();
        e.probe.validate();
        if (e.effectiveness.dataset_id != e.probe.dataset_id) {
            throw Error("compute_beta: effectiveness for " + e.effectiveness.dataset_id + " paired with probe of " +
                        e.probe.dataset_id);
        }
        datasets.insert(e.effectiveness.dataset_id);
        for (const auto& [metric, value] : e.effectiveness.metrics) {
            auto& [sum, count] = sums[{e.probe.feature, e.effectiveness.config_tag, metric}];
            sum += value - e.probe.acc_lp;
            ++count;
        }
    }

    BetaTable table;
    table.provenance.assign(datasets.begin(), datasets.end());
    for (const auto& [key, acc] : sums) {
        const double beta = acc.first / static_cast<double>(acc.second);
        if (!(beta >= -1.0 && beta <= 1.0)) throw Error("compute_beta: beta outside [-1, 1]");
        table.entries.emplace(key, beta);
    }
    return table;
}

EstimationReport estimate(const ProbeSummary& summary,
                          const BetaTable& betas,
                          const std::string& config_tag,
                          std::span<const Metric> metrics)
{
    summary.validate();
    EstimationReport r;
    r.dataset_id = summary.dataset_id;
    r.feature = summary.feature;
    r.config_tag = config_tag;
    r.layer_policy = summary.layer_policy;
    r.layer_used = summary.layer_used;
    for (auto m : metrics) {
        const double beta = betas.at({summary.feature, config_tag, m});
        r.estimate[m] = std::clamp(summary.acc_lp + beta, 0.0, 1.0);
    }
    return r;
}

std::map<Metric, double> estimation_error(const EstimationReport& report, const EffectivenessRecord& truth)
{
    if (report.dataset_id != truth.dataset_id || report.config_tag != truth.config_tag) {
        throw Error("estimation_error: report for " + report.dataset_id + "/" + report.config_tag +
                    " compared with truth for " + truth.dataset_id + "/" + truth.config_tag);
    }
    truth.validate();
    std::map<Metric, double> err;
    for (const auto& [m, est] : report.estimate) {
        const auto it = truth.metrics.find(m);
        if (it == truth.metrics.end()) {
            throw Error("estimation_error: truth for " + truth.dataset_id + " lacks metric " + std::string(to_string(m)));
        }
        err[m] = est - it->second;
    }
    return err;
}

LooResult leave_one_out(std::span<const KnowledgeEntry> all)
{
    // (feature, config) -> dataset -> entry
    std::map<std::pair<Feature, std::string>, std::map<std::string, const KnowledgeEntry*>> groups;
    for (const auto& e : all) {
        auto& slot = groups[{e.probe.feature, e.effectiveness.config_tag}][e.effectiveness.dataset_id];
        if (slot) {
            throw Error("leave_one_out: duplicate entry for " + e.effectiveness.dataset_id + "/" +
                        e.effectiveness.config_tag + "/" + std::string(to_string(e.probe.feature)));
        }
        slot = &e;
    }
    if (groups.empty()) throw Error("leave_one_out: no entries");

    LooResult result;
    for (const auto& [key, by_dataset] : groups) {
        const auto& [feature, config] = key;
        if (by_dataset.size() < 3) {
            throw Error("leave_one_out: " + std::string(to_string(feature)) + "/" + config + " has " +
                        std::to_string(by_dataset.size()) + " datasets; at least 3 required");
        }

        LooMean mean{feature, config, {}};
        for (const auto& [held_out, target] : by_dataset) {
            std::vector<KnowledgeEntry> knowledge;
            LooRow row{feature, config, {}, held_out, {}, {}, {}};
            for (const auto& [other, entry] : by_dataset) {
                if (other == held_out) continue;
                knowledge.push_back(*entry);
                row.knowledge_datasets.push_back(other);
            }
            const BetaTable betas = compute_beta(knowledge);

            std::vector<Metric> metrics;
            for (const auto& [m, v] : target->effectiveness.metrics) metrics.push_back(m);
            const auto report = estimate(target->probe, betas, config, metrics);
            row.error = estimation_error(report, target->effectiveness);
            row.estimate = report.estimate;
            for (auto m : metrics) row.beta[m] = betas.at({feature, config, m});
            for (const auto& [m, e] : row.error) mean.mean_abs_error[m] += std::abs(e);
            result.rows.push_back(std::move(row));
        }
        for (auto& [m, total] : mean.mean_abs_error) total /= static_cast<double>(by_dataset.size());
        result.means.push_back(std::move(mean));
    }
    return result;
}

} // namespace lpass
