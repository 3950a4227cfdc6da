#pragma once
// Seeded synthetic inputs shared by the unit and acceptance suites.

#include <lpass/activation.hpp>
#include <lpass/probe.hpp>
#include <lpass/pruning.hpp>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace lpass::testing {

std::filesystem::path fixture_dir();

/// Gaussian clusters, one per class, `spread` apart relative to unit noise.
struct Clusters {
    rowmat_type<float> X;
    std::vector<index_t> y;
};
Clusters gaussian_clusters(seed_t seed, index_t n, index_t dim, index_t classes, double spread);

/// Activation stack whose class signal grows with depth up to k_star and is
/// absent above it. Labels cover every row; groups cycle over three CWEs.
struct LayeredSet {
    std::vector<ActivationTensor> layers;
    std::map<std::string, ProbeLabel> labels;
    std::uint32_t k_star = 0;
};
LayeredSet layered_activations(seed_t seed, std::uint32_t k_star, std::uint32_t num_layers, index_t n, index_t dim,
                               index_t classes);

/// Largest relative error between loss_and_grad and central differences
/// over every parameter of a random model and batch. A parameter whose
/// +/-step perturbation flips a hidden ReLU is counted as a kink crossing
/// instead: the loss is not differentiable across it, so the difference
/// quotient does not estimate the gradient there.
struct GradientCheck {
    double max_rel_error = 0.0;
    std::size_t parameters = 0;      ///< compared
    std::size_t kink_crossings = 0;  ///< skipped
};
GradientCheck gradient_check(seed_t seed, double step = 1e-4);

/// Reference cut-off: recomputes every curve's best accuracy and scans the
/// layers with a strict `<`, so the first minimum wins.
std::uint32_t brute_force_kcut(const std::vector<std::vector<double>>& accuracies);

/// A bundle of 1-5 random curves sharing a random layer count; every other
/// bundle is quantized to force ties.
std::vector<std::vector<double>> random_curve_bundle(Rng& rng);

/// CC- or HD-like values concentrated the way vulnerability corpora are:
/// most CC mass on 1..5 and most HD mass on [1, 31), a long tail above, and
/// for HD a share of sub-1 values that binning must discard.
std::vector<double> concentrated_values(seed_t seed, Feature feature, std::size_t n);

/// Reads a whole file as bytes.
std::string slurp(const std::filesystem::path& path);

/// A fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

} // namespace lpass::testing
