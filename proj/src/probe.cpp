#include <lpass/probe.hpp>

#include <algorithm>
#include <set>
#include <thread>

namespace lpass {

GroupAccuracy group_accuracy(std::span<const index_t> predicted,
                             std::span<const index_t> y,
                             std::span<const std::string> groups)
{
    if (predicted.size() != y.size() || y.size() != groups.size()) {
        throw Error("group accuracy: predictions, labels and groups differ in length");
    }
    if (y.empty()) throw Error("group accuracy: no samples");

    std::map<std::string, std::pair<std::size_t, std::size_t>> tally;  // correct, total
    for (std::size_t i = 0; i < y.size(); ++i) {
        auto& [correct, total] = tally[groups[i]];
        correct += predicted[i] == y[i] ? 1 : 0;
        ++total;
    }

    GroupAccuracy out;
    for (const auto& [group, counts] : tally) {
        out.per_group[group] = static_cast<double>(counts.first) / static_cast<double>(counts.second);
    }
    double sum = 0.0;
    for (const auto& [group, acc] : out.per_group) sum += acc;
    out.average = sum / static_cast<double>(out.per_group.size());
    return out;
}

GroupAccuracy evaluate_per_group(const ProbeModel<float>& model,
                                 const Eigen::Ref<const rowmat_type<float>>& X,
                                 std::span<const index_t> y,
                                 std::span<const std::string> groups)
{
    if (static_cast<std::size_t>(X.rows()) != y.size()) throw Error("evaluate_per_group: row/label mismatch");
    const auto predicted = model.predict(X);
    return group_accuracy(predicted, y, groups);
}

namespace {

struct ProbeSplit {
    std::vector<index_t> train_rows;
    std::vector<index_t> val_rows;
    std::vector<index_t> targets;       ///< compact class per tensor row (-1 = unused)
    std::vector<std::string> groups;    ///< per tensor row
    index_t num_classes = 0;
};

ProbeSplit plan_split(const ActivationTensor& reference,
                      const std::map<std::string, ProbeLabel>& labels,
                      seed_t seed,
                      const ProbeProtocol& protocol)
{
    if (!(protocol.val_fraction > 0.0 && protocol.val_fraction < 1.0)) {
        throw Error("probe protocol: validation fraction must lie in (0, 1)");
    }
    const auto n = static_cast<std::size_t>(reference.num_samples());
    ProbeSplit split;
    split.targets.assign(n, -1);
    split.groups.resize(n);

    std::map<std::string, std::vector<index_t>> by_group;
    for (std::size_t r = 0; r < n; ++r) {
        const auto it = labels.find(reference.sample_ids[r]);
        if (it == labels.end()) continue;
        split.groups[r] = it->second.group;
        by_group[it->second.group].push_back(static_cast<index_t>(r));
    }
    if (by_group.empty()) throw Error("probe: no activation rows carry a label");

    Rng rng(seed);
    std::vector<index_t> rows;
    if (protocol.equalize_groups) {
        std::size_t smallest = SIZE_MAX;
        for (const auto& [g, members] : by_group) smallest = std::min(smallest, members.size());
        for (auto& [g, members] : by_group) {
            rng.shuffle(std::span(members));
            members.resize(smallest);
            std::sort(members.begin(), members.end());
            rows.insert(rows.end(), members.begin(), members.end());
        }
    } else {
        for (const auto& [g, members] : by_group) rows.insert(rows.end(), members.begin(), members.end());
    }

    std::set<index_t> classes;
    for (auto r : rows) classes.insert(labels.at(reference.sample_ids[static_cast<std::size_t>(r)]).target);
    if (classes.size() < 2) throw Error("probe: targets contain a single class; nothing to learn");
    std::map<index_t, index_t> compact;
    for (auto c : classes) compact.emplace(c, static_cast<index_t>(compact.size()));
    split.num_classes = static_cast<index_t>(compact.size());

    // Stratify on (class, group) so every group and class can reach both sides.
    std::map<std::pair<index_t, std::string>, std::vector<index_t>> strata;
    for (auto r : rows) {
        const auto& label = labels.at(reference.sample_ids[static_cast<std::size_t>(r)]);
        const index_t c = compact.at(label.target);
        split.targets[static_cast<std::size_t>(r)] = c;
        strata[{c, label.group}].push_back(r);
    }
    for (auto& [key, members] : strata) {
        rng.shuffle(std::span(members));
        auto n_val = static_cast<std::size_t>(std::llround(protocol.val_fraction * static_cast<double>(members.size())));
        n_val = std::min(n_val, members.size() - 1);
        split.val_rows.insert(split.val_rows.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_val));
        split.train_rows.insert(split.train_rows.end(), members.begin() + static_cast<std::ptrdiff_t>(n_val), members.end());
    }
    std::sort(split.train_rows.begin(), split.train_rows.end());
    std::sort(split.val_rows.begin(), split.val_rows.end());
    if (split.val_rows.empty()) throw Error("probe: too few samples to hold out a validation split");
    return split;
}

LayerAccuracy probe_layer(const ActivationTensor& layer, const ProbeSplit& split, const ProbeConfig& config)
{
    const rowmat_type<float> X_train_raw = layer.data(split.train_rows, Eigen::all);
    const rowmat_type<float> X_val_raw = layer.data(split.val_rows, Eigen::all);
    const auto scaler = Standardizer<float>::fit(X_train_raw);

    std::vector<index_t> y_train;
    for (auto r : split.train_rows) y_train.push_back(split.targets[static_cast<std::size_t>(r)]);
    std::vector<index_t> y_val;
    std::vector<std::string> g_val;
    for (auto r : split.val_rows) {
        y_val.push_back(split.targets[static_cast<std::size_t>(r)]);
        g_val.push_back(split.groups[static_cast<std::size_t>(r)]);
    }

    ProbeConfig layer_config = config;
    layer_config.seed = config.seed ^ static_cast<seed_t>(layer.layer_index);
    const auto trained = train_probe<float>(scaler.apply(X_train_raw), y_train, split.num_classes, layer_config);
    const auto acc = evaluate_per_group(trained.model, scaler.apply(X_val_raw), y_val, g_val);
    return {layer.layer_index, acc.per_group, acc.average};
}

} // namespace

LayerAccuracyCurve probe_all_layers(std::span<const ActivationTensor> layers,
                                    const std::map<std::string, ProbeLabel>& labels,
                                    const ProbeConfig& config,
                                    const ProbeProtocol& protocol,
                                    std::span<const std::size_t> layer_order)
{
    config.validate();
    if (layers.empty()) throw Error("probe: no activation layers");
    for (const auto& l : layers) {
        if (l.sample_ids != layers.front().sample_ids) throw Error("probe: layers disagree on sample ids");
    }

    std::vector<std::size_t> order;
    if (layer_order.empty()) {
        for (std::size_t k = 0; k < layers.size(); ++k) order.push_back(k);
    } else {
        order.assign(layer_order.begin(), layer_order.end());
        auto sorted = order;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t k = 0; k < sorted.size(); ++k) {
            if (sorted[k] != k || sorted.size() != layers.size()) throw Error("probe: layer order is not a permutation");
        }
    }

    const ProbeSplit split = plan_split(layers.front(), labels, config.seed, protocol);

    LayerAccuracyCurve curve;
    curve.layers.resize(layers.size());
    const unsigned workers = std::max(1u, std::min<unsigned>(protocol.threads, static_cast<unsigned>(layers.size())));
    if (workers == 1) {
        for (auto k : order) curve.layers[k] = probe_layer(layers[k], split, config);
        return curve;
    }

    std::vector<std::exception_ptr> failures(workers);
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i = w; i < order.size(); i += workers) {
                        curve.layers[order[i]] = probe_layer(layers[order[i]], split, config);
                    }
                } catch (...) {
                    failures[w] = std::current_exception();
                }
            });
        }
    }
    for (const auto& f : failures) {
        if (f) std::rethrow_exception(f);
    }
    return curve;
}

} // namespace lpass
