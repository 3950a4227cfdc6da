#include "../support/synthetic.hpp"

#include <lpass/pruning.hpp>

#include <doctest.h>

#include <algorithm>
#include <set>

using namespace lpass;

namespace {

std::vector<LossCurve> to_loss_curves(const std::vector<std::vector<double>>& bundle, double scale = 1.0)
{
    std::vector<LossCurve> curves;
    for (std::size_t i = 0; i < bundle.size(); ++i) {
        std::vector<double> scaled(bundle[i]);
        for (auto& v : scaled) v *= scale;
        curves.push_back(loss_curve(scaled, "D" + std::to_string(i), i % 2 ? Feature::hd : Feature::cc));
    }
    return curves;
}

} // namespace

TEST_CASE("loss curve is measured from the best layer")
{
    const std::vector<double> acc{0.5, 0.75, 0.625, 0.75};
    const auto loss = loss_curve(acc, "PrimeVul", Feature::hd);
    CHECK(loss.losses == std::vector<double>{0.25, 0.0, 0.125, 0.0});
    CHECK(loss.dataset_id == "PrimeVul");
    CHECK(loss.feature == Feature::hd);
    CHECK_THROWS_AS(loss_curve(std::vector<double>{}), Error);

    LayerAccuracyCurve curve;
    curve.dataset_id = "Big-Vul";
    curve.feature = Feature::cc;
    for (std::uint32_t k = 0; k < 3; ++k) curve.layers.push_back({k, {}, 0.1 * k});
    const auto from_curve = loss_curve(curve);
    CHECK(from_curve.dataset_id == "Big-Vul");
    CHECK(from_curve.losses.back() == 0.0);
    CHECK(*std::min_element(from_curve.losses.begin(), from_curve.losses.end()) == 0.0);
}

TEST_CASE("cut-off for a small bundle")
{
    const std::vector<LossCurve> curves{
        loss_curve(std::vector<double>{0.3, 0.5, 0.6, 0.6, 0.4}, "A", Feature::cc),
        loss_curve(std::vector<double>{0.2, 0.6, 0.5, 0.7, 0.7}, "B", Feature::hd),
    };
    const auto d = select_kcut(curves);
    // Scores: 0.8, 0.2, 0.2, 0.0, 0.2
    CHECK(d.k_cut == 3);
    REQUIRE(d.total_score.size() == 5);
    CHECK(d.total_score[3] == 0.0);
    CHECK(d.total_score[0] == doctest::Approx(0.8));
    CHECK(d.curve_ids == std::vector<std::string>{"A/CC", "B/HD"});
}

TEST_CASE("ties go to the smallest layer")
{
    const std::vector<LossCurve> flat{loss_curve(std::vector<double>{0.5, 0.5, 0.5})};
    CHECK(select_kcut(flat).k_cut == 0);
    const std::vector<LossCurve> two_peaks{loss_curve(std::vector<double>{0.1, 0.9, 0.2, 0.9})};
    CHECK(select_kcut(two_peaks).k_cut == 1);
}

TEST_CASE("select_kcut rejects bad bundles")
{
    CHECK_THROWS_AS(select_kcut(std::vector<LossCurve>{}), Error);
    const std::vector<LossCurve> mismatched{loss_curve(std::vector<double>{0.1, 0.2}),
                                            loss_curve(std::vector<double>{0.1, 0.2, 0.3})};
    CHECK_THROWS_AS(select_kcut(mismatched), Error);
    std::vector<LossCurve> empty(1);
    CHECK_THROWS_AS(select_kcut(empty), Error);
}

TEST_CASE("select_kcut agrees with brute force")
{
    Rng rng(31337);
    for (int trial = 0; trial < 1000; ++trial) {
        CAPTURE(trial);
        const auto bundle = lpass::testing::random_curve_bundle(rng);
        REQUIRE(select_kcut(to_loss_curves(bundle)).k_cut == lpass::testing::brute_force_kcut(bundle));
    }
}

TEST_CASE("scaling every curve leaves the cut-off unchanged")
{
    Rng rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        const auto bundle = lpass::testing::random_curve_bundle(rng);
        const auto base = select_kcut(to_loss_curves(bundle)).k_cut;
        // Powers of two keep every loss exact, so ties survive.
        CHECK(select_kcut(to_loss_curves(bundle, 0.5)).k_cut == base);
        CHECK(select_kcut(to_loss_curves(bundle, 0.25)).k_cut == base);
    }
}

TEST_CASE("curve order does not matter")
{
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        auto bundle = lpass::testing::random_curve_bundle(rng);
        const auto base = select_kcut(to_loss_curves(bundle)).k_cut;
        std::reverse(bundle.begin(), bundle.end());
        CHECK(select_kcut(to_loss_curves(bundle)).k_cut == base);
    }
}

TEST_CASE("half cut")
{
    CHECK(baseline_cutpoints(15, 24, 0).half_cut == 7);
    CHECK(baseline_cutpoints(5, 18, 0).half_cut == 2);
    CHECK(baseline_cutpoints(1, 2, 0).half_cut == 0);
}

TEST_CASE("random removal matches the pruned count")
{
    for (seed_t seed = 0; seed < 200; ++seed) {
        const std::uint32_t total = 2 + static_cast<std::uint32_t>(seed % 40);
        const std::uint32_t k = 1 + static_cast<std::uint32_t>(seed % (total - 1));
        const auto b = baseline_cutpoints(k, total, seed);
        CHECK(b.random_removed.size() == total - k);
        CHECK(std::is_sorted(b.random_removed.begin(), b.random_removed.end()));
        CHECK(std::set<std::uint32_t>(b.random_removed.begin(), b.random_removed.end()).size() ==
              b.random_removed.size());
        CHECK(b.random_removed.front() >= 1);
        CHECK(b.random_removed.back() <= total);
        CHECK(baseline_cutpoints(k, total, seed).random_removed == b.random_removed);
    }
    CHECK_FALSE(baseline_cutpoints(5, 24, 1).random_removed == baseline_cutpoints(5, 24, 2).random_removed);
    CHECK_THROWS_AS(baseline_cutpoints(0, 24, 0), Error);
    CHECK_THROWS_AS(baseline_cutpoints(24, 24, 0), Error);
}

TEST_CASE("prune plans keep layers up to the cut-off")
{
    const auto bert = prune_plan(15, 24);
    CHECK(bert.retained.size() == 16);
    CHECK(bert.retained.front() == 0);
    CHECK(bert.retained.back() == 15);
    CHECK(bert.removed.size() == 9);
    CHECK(bert.removed.front() == 16);
    CHECK(bert.removed.back() == 24);

    const auto gemma = prune_plan(5, 18);
    CHECK(gemma.removed.size() == 13);
    CHECK(gemma.retained.size() == 6);

    for (std::uint32_t total = 1; total < 40; ++total) {
        for (std::uint32_t k = 0; k <= total; ++k) {
            const auto p = prune_plan(k, total);
            CHECK(p.removed.size() + p.retained.size() == total + 1);
            CHECK(p.k_cut == k);
            CHECK(p.total_layers == total);
        }
    }
    CHECK(prune_plan(7, 7).removed.empty());
    CHECK_THROWS_AS(prune_plan(8, 7), Error);
}
