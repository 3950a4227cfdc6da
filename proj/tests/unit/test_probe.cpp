#include "../support/synthetic.hpp"

#include <lpass/probe.hpp>

#include <doctest.h>

#include <algorithm>
#include <numeric>

using namespace lpass;

namespace {

double training_accuracy(const ProbeModel<float>& model, const rowmat_type<float>& X, const std::vector<index_t>& y)
{
    const auto predicted = model.predict(X);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < y.size(); ++i) hits += predicted[i] == y[i];
    return static_cast<double>(hits) / static_cast<double>(y.size());
}

// Held-out accuracy of assigning each row to the closest training class mean.
double nearest_centroid_accuracy(const ActivationTensor& layer, const std::map<std::string, ProbeLabel>& labels,
                                 index_t classes)
{
    const index_t n = layer.num_samples();
    const index_t dim = layer.hidden_dim();
    rowmat_type<double> centroids = rowmat_type<double>::Zero(classes, dim);
    std::vector<double> counts(static_cast<std::size_t>(classes), 0.0);
    // Even rows train, odd rows test.
    for (index_t i = 0; i < n; i += 2) {
        const auto c = labels.at(layer.sample_ids[static_cast<std::size_t>(i)]).target;
        centroids.row(c) += layer.data.row(i).cast<double>();
        counts[static_cast<std::size_t>(c)] += 1.0;
    }
    for (index_t c = 0; c < classes; ++c) centroids.row(c) /= counts[static_cast<std::size_t>(c)];
    std::size_t hits = 0, total = 0;
    for (index_t i = 1; i < n; i += 2) {
        index_t best = 0;
        (centroids.rowwise() - layer.data.row(i).cast<double>()).rowwise().squaredNorm().minCoeff(&best);
        hits += best == labels.at(layer.sample_ids[static_cast<std::size_t>(i)]).target;
        ++total;
    }
    return static_cast<double>(hits) / static_cast<double>(total);
}

bool same_curve(const LayerAccuracyCurve& a, const LayerAccuracyCurve& b)
{
    if (a.layers.size() != b.layers.size()) return false;
    for (std::size_t k = 0; k < a.layers.size(); ++k) {
        if (a.layers[k].layer != b.layers[k].layer || a.layers[k].average != b.layers[k].average ||
            a.layers[k].per_group != b.layers[k].per_group) {
            return false;
        }
    }
    return true;
}

ProbeConfig quick_config(seed_t seed)
{
    ProbeConfig c;
    c.hidden_layer_sizes = {32};
    c.epochs = 10;
    c.seed = seed;
    return c;
}

} // namespace

TEST_CASE("analytic gradient matches central differences")
{
    std::size_t compared = 0, skipped = 0;
    for (seed_t seed = 0; seed < 50; ++seed) {
        CAPTURE(seed);
        const auto check = lpass::testing::gradient_check(seed);
        CHECK(check.max_rel_error < 1e-4);
        compared += check.parameters;
        skipped += check.kink_crossings;
    }
    CHECK(skipped * 100 <= compared + skipped);
}

TEST_CASE("zero model predicts a uniform distribution")
{
    const std::vector<index_t> dims{4, 3, 5};
    const auto model = ProbeModel<double>::zeros(dims);
    const rowmat_type<double> X = rowmat_type<double>::Random(7, 4);
    const auto p = model.predict_proba(X);
    CHECK((p.array() - 0.2).abs().maxCoeff() < 1e-15);
    const std::vector<index_t> y{0, 1, 2, 3, 4, 0, 1};
    CHECK(loss_and_grad<double>(model, X, y).loss == doctest::Approx(std::log(5.0)).epsilon(1e-14));
    CHECK_THROWS_AS(loss_and_grad<double>(model, X, std::vector<index_t>{0, 1}), Error);
    CHECK_THROWS_AS(loss_and_grad<double>(model, X, std::vector<index_t>{0, 1, 2, 3, 4, 0, 5}), Error);
}

TEST_CASE("training on separable clusters")
{
    const auto data = lpass::testing::gaussian_clusters(1, 400, 8, 4, 6.0);
    ProbeConfig config;
    config.seed = 11;
    const auto trained = train_probe<float>(data.X, data.y, 4, config);
    CHECK(training_accuracy(trained.model, data.X, data.y) >= 0.99);

    const auto& losses = trained.report.epoch_losses;
    REQUIRE(losses.size() == 30);
    std::size_t non_increasing = 0;
    for (std::size_t e = 1; e < losses.size(); ++e) non_increasing += losses[e] <= losses[e - 1];
    CHECK(non_increasing * 10 >= 9 * (losses.size() - 1));
    CHECK(losses.back() < losses.front());
}

TEST_CASE("plain SGD also trains")
{
    const auto data = lpass::testing::gaussian_clusters(2, 300, 6, 3, 6.0);
    ProbeConfig config;
    config.optimizer = Optimizer::sgd;
    config.learning_rate = 0.1;
    config.seed = 3;
    const auto trained = train_probe<float>(data.X, data.y, 3, config);
    CHECK(training_accuracy(trained.model, data.X, data.y) >= 0.95);
}

TEST_CASE("training is a function of the seed")
{
    const auto data = lpass::testing::gaussian_clusters(3, 200, 5, 3, 2.0);
    const auto a = train_probe<float>(data.X, data.y, 3, quick_config(5));
    const auto b = train_probe<float>(data.X, data.y, 3, quick_config(5));
    const auto c = train_probe<float>(data.X, data.y, 3, quick_config(6));
    CHECK(a.model == b.model);
    CHECK(a.report.epoch_losses == b.report.epoch_losses);
    CHECK_FALSE(a.model == c.model);
}

TEST_CASE("training rejects inconsistent input")
{
    const auto data = lpass::testing::gaussian_clusters(4, 30, 3, 3, 2.0);
    CHECK_THROWS_AS(train_probe<float>(data.X, data.y, 4, quick_config(0)), Error);  // class 3 absent
    CHECK_THROWS_AS(train_probe<float>(data.X, data.y, 1, quick_config(0)), Error);
    const std::vector<index_t> short_y(data.y.begin(), data.y.end() - 1);
    CHECK_THROWS_AS(train_probe<float>(data.X, short_y, 3, quick_config(0)), Error);

    auto bad = quick_config(0);
    bad.epochs = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = quick_config(0);
    bad.hidden_layer_sizes = {0};
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = quick_config(0);
    bad.adam_beta2 = 1.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = quick_config(0);
    bad.learning_rate = -1;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("standardizer uses training statistics")
{
    rowmat_type<double> train(4, 2);
    train << 1, 5, 3, 5, 5, 5, 7, 5;
    const auto s = Standardizer<double>::fit(train);
    CHECK(s.mean(0) == 4.0);
    CHECK(s.scale(0) == doctest::Approx(std::sqrt(5.0)));
    CHECK(s.scale(1) == 1.0);  // constant column
    const auto z = s.apply(train);
    CHECK(std::abs(z.col(0).mean()) < 1e-15);
    CHECK(z.col(1).isZero());

    rowmat_type<double> test(1, 2);
    test << 4, 6;
    const auto zt = s.apply(test);
    CHECK(zt(0, 0) == 0.0);
    CHECK(zt(0, 1) == 1.0);
}

TEST_CASE("group accuracy is an unweighted mean")
{
    const std::vector<index_t> predicted{0, 1, 1, 0, 2, 2};
    const std::vector<index_t> y{0, 1, 0, 0, 2, 1};
    const std::vector<std::string> groups{"CWE-20", "CWE-20", "CWE-20", "CWE-20", "NoCWE", "NoCWE"};
    const auto acc = group_accuracy(predicted, y, groups);
    CHECK(acc.per_group.at("CWE-20") == 0.75);
    CHECK(acc.per_group.at("NoCWE") == 0.5);
    CHECK(acc.average == 0.625);

    // Repeating one group's rows leaves every score unchanged.
    std::vector<index_t> p2 = predicted, y2 = y;
    std::vector<std::string> g2 = groups;
    for (int rep = 0; rep < 3; ++rep) {
        p2.insert(p2.end(), predicted.begin(), predicted.begin() + 4);
        y2.insert(y2.end(), y.begin(), y.begin() + 4);
        g2.insert(g2.end(), groups.begin(), groups.begin() + 4);
    }
    const auto acc2 = group_accuracy(p2, y2, g2);
    CHECK(acc2.per_group == acc.per_group);
    CHECK(acc2.average == acc.average);

    CHECK_THROWS_AS(group_accuracy(predicted, y, std::vector<std::string>{"x"}), Error);
}

TEST_CASE("noise gives chance accuracy on held-out rows")
{
    auto set = lpass::testing::layered_activations(21, 0, 2, 600, 8, 3);
    const auto curve = probe_all_layers(set.layers, set.labels, quick_config(21));
    REQUIRE(curve.layers.size() == 3);
    // Layers 1 and 2 carry no class signal.
    for (std::size_t k = 1; k < 3; ++k) CHECK(std::abs(curve.layers[k].average - 1.0 / 3.0) <= 0.1);
}

TEST_CASE("per-layer curve follows a nearest-centroid reference")
{
    const auto set = lpass::testing::layered_activations(7, 4, 8, 600, 8, 3);
    ProbeConfig config;
    config.seed = 7;
    const auto curve = probe_all_layers(set.layers, set.labels, config);
    REQUIRE(curve.layers.size() == 9);
    for (std::size_t k = 0; k < 9; ++k) {
        CAPTURE(k);
        const double reference = nearest_centroid_accuracy(set.layers[k], set.labels, 3);
        CHECK(curve.layers[k].layer == k);
        CAPTURE(reference);
        CAPTURE(curve.layers[k].average);
        CHECK(std::abs(curve.layers[k].average - reference) <= 0.1);
    }
    const auto averages = curve.averages();
    const auto best = std::max_element(averages.begin(), averages.end()) - averages.begin();
    CHECK(std::abs(best - 4) <= 1);
}

TEST_CASE("processing order, threads and reruns do not change the curve")
{
    const auto set = lpass::testing::layered_activations(9, 3, 6, 300, 6, 3);
    const auto config = quick_config(9);
    const auto forward = probe_all_layers(set.layers, set.labels, config);

    std::vector<std::size_t> reversed(set.layers.size());
    std::iota(reversed.rbegin(), reversed.rend(), std::size_t{0});
    CHECK(same_curve(forward, probe_all_layers(set.layers, set.labels, config, {}, reversed)));

    ProbeProtocol threaded;
    threaded.threads = 4;
    CHECK(same_curve(forward, probe_all_layers(set.layers, set.labels, config, threaded)));
    CHECK(same_curve(forward, probe_all_layers(set.layers, set.labels, config)));

    const std::vector<std::size_t> duplicate{0, 0, 1, 2, 3, 4, 5};
    CHECK_THROWS_AS(probe_all_layers(set.layers, set.labels, config, {}, duplicate), Error);
}

TEST_CASE("unlabelled samples are skipped")
{
    auto set = lpass::testing::layered_activations(12, 2, 3, 300, 6, 3);
    const auto config = quick_config(12);
    const auto full = probe_all_layers(set.layers, set.labels, config);

    // Add rows with no label; they must not influence anything.
    auto extended = set.layers;
    for (auto& layer : extended) {
        rowmat_type<float> grown(layer.num_samples() + 5, layer.hidden_dim());
        grown.topRows(layer.num_samples()) = layer.data;
        grown.bottomRows(5).setConstant(100.0f);
        layer.data = grown;
        for (int i = 0; i < 5; ++i) layer.sample_ids.push_back("stray-" + std::to_string(i));
    }
    CHECK(same_curve(full, probe_all_layers(extended, set.labels, config)));
}
