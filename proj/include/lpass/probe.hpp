#pragma once

#include <lpass/activation.hpp>
#include <lpass/error.hpp>
#include <lpass/metrics.hpp>
#include <lpass/random.hpp>
#include <lpass/types.hpp>

#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace lpass {

enum class Optimizer { adam, sgd };

struct ProbeConfig {
    std::vector<index_t> hidden_layer_sizes{128};
    double learning_rate = 1e-3;
    int epochs = 30;
    index_t batch_size = 64;
    seed_t seed = 0;
    Optimizer optimizer = Optimizer::adam;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;

    void validate() const
    {
        for (auto h : hidden_layer_sizes) {
            if (h <= 0) throw Error("probe config: hidden layer sizes must be positive");
        }
        if (!(learning_rate > 0.0)) throw Error("probe config: learning rate must be positive");
        if (epochs <= 0) throw Error("probe config: epochs must be positive");
        if (batch_size <= 0) throw Error("probe config: batch size must be positive");
        if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0 && adam_beta2 > 0.0 && adam_beta2 < 1.0 && adam_epsilon > 0.0)) {
            throw Error("probe config: invalid Adam constants");
        }
    }
};

/// Feed-forward ReLU network ending in a softmax. weights[l] maps layer l's
/// activations (columns) to layer l+1 (in × out), so a batch propagates as
/// `A * W + b`.
template <class Scalar>
struct ProbeModel {
    std::vector<mat_type<Scalar>> weights;
    std::vector<rowvec_type<Scalar>> biases;

    index_t input_dim() const { return weights.front().rows(); }
    index_t num_classes() const { return weights.back().cols(); }
    std::size_t num_layers() const { return weights.size(); }

    /// dims = {input, hidden..., classes}; all parameters zero.
    static ProbeModel zeros(std::span<const index_t> dims)
    {
        if (dims.size() < 2) throw Error("probe model needs at least input and output dimensions");
        ProbeModel m;
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
            if (dims[l] <= 0 || dims[l + 1] <= 0) throw Error("probe model dimensions must be positive");
            m.weights.push_back(mat_type<Scalar>::Zero(dims[l], dims[l + 1]));
            m.biases.push_back(rowvec_type<Scalar>::Zero(dims[l + 1]));
        }
        return m;
    }

    /// He-uniform weights, zero biases.
    static ProbeModel random(std::span<const index_t> dims, Rng& rng)
    {
        ProbeModel m = zeros(dims);
        for (auto& w : m.weights) {
            const double bound = std::sqrt(6.0 / static_cast<double>(w.rows()));
            for (index_t i = 0; i < w.size(); ++i) w.data()[i] = static_cast<Scalar>(rng.uniform(-bound, bound));
        }
        return m;
    }

    template <class Other>
    ProbeModel<Other> cast() const
    {
        ProbeModel<Other> m;
        for (const auto& w : weights) m.weights.push_back(w.template cast<Other>());
        for (const auto& b : biases) m.biases.push_back(b.template cast<Other>());
        return m;
    }

    /// Pre-softmax scores for a batch (rows are samples).
    rowmat_type<Scalar> logits(const Eigen::Ref<const rowmat_type<Scalar>>& X) const
    {
        rowmat_type<Scalar> a = X;
        for (std::size_t l = 0; l < weights.size(); ++l) {
            rowmat_type<Scalar> z = (a * weights[l]).rowwise() + biases[l];
            if (l + 1 < weights.size()) z = z.cwiseMax(Scalar(0));
            a = std::move(z);
        }
        return a;
    }

    rowmat_type<Scalar> predict_proba(const Eigen::Ref<const rowmat_type<Scalar>>& X) const
    {
        rowmat_type<Scalar> z = logits(X);
        z.colwise() -= z.rowwise().maxCoeff();
        z = z.array().exp().matrix();
        z.array().colwise() /= z.rowwise().sum().array();
        return z;
    }

    std::vector<index_t> predict(const Eigen::Ref<const rowmat_type<Scalar>>& X) const
    {
        const rowmat_type<Scalar> z = logits(X);
        std::vector<index_t> out(static_cast<std::size_t>(z.rows()));
        for (index_t i = 0; i < z.rows(); ++i) z.row(i).maxCoeff(&out[static_cast<std::size_t>(i)]);
        return out;
    }

    friend bool operator==(const ProbeModel& a, const ProbeModel& b)
    {
        if (a.weights.size() != b.weights.size()) return false;
        for (std::size_t l = 0; l < a.weights.size(); ++l) {
            if (a.weights[l].rows() != b.weights[l].rows() || a.weights[l].cols() != b.weights[l].cols()) return false;
            if (a.weights[l] != b.weights[l] || a.biases[l] != b.biases[l]) return false;
        }
        return true;
    }
};

/// Mean softmax cross-entropy and its exact gradient. The gradient is
/// returned in a model-shaped container.
template <class Scalar>
struct LossAndGrad {
    Scalar loss;
    ProbeModel<Scalar> gradient;
};

template <class Scalar>
LossAndGrad<Scalar> loss_and_grad(const ProbeModel<Scalar>& model,
                                  const Eigen::Ref<const rowmat_type<Scalar>>& X,
                                  std::span<const index_t> y)
{
    const index_t n = X.rows();
    if (n == 0 || static_cast<index_t>(y.size()) != n) throw Error("loss_and_grad: batch/label size mismatch");
    if (X.cols() != model.input_dim()) throw Error("loss_and_grad: input width does not match the model");
    const std::size_t L = model.num_layers();

    // Forward, keeping each layer's input activations.
    std::vector<rowmat_type<Scalar>> inputs;
    inputs.reserve(L);
    inputs.emplace_back(X);
    rowmat_type<Scalar> z;
    for (std::size_t l = 0; l < L; ++l) {
        z = (inputs[l] * model.weights[l]).rowwise() + model.biases[l];
        if (l + 1 < L) inputs.push_back(z.cwiseMax(Scalar(0)));
    }

    // Stable log-softmax on the logits in z.
    const vec_type<Scalar> row_max = z.rowwise().maxCoeff();
    rowmat_type<Scalar> shifted = z.colwise() - row_max;
    rowmat_type<Scalar> probs = shifted.array().exp().matrix();
    const vec_type<Scalar> sums = probs.rowwise().sum();
    probs.array().colwise() /= sums.array();

    Scalar loss = 0;
    for (index_t i = 0; i < n; ++i) {
        const index_t c = y[static_cast<std::size_t>(i)];
        if (c < 0 || c >= model.num_classes()) throw Error("loss_and_grad: label out of range");
        loss -= shifted(i, c) - std::log(sums(i));
    }
    loss /= static_cast<Scalar>(n);

    // Backward.
    rowmat_type<Scalar> delta = probs;
    for (index_t i = 0; i < n; ++i) delta(i, y[static_cast<std::size_t>(i)]) -= Scalar(1);
    delta /= static_cast<Scalar>(n);

    LossAndGrad<Scalar> out{loss, ProbeModel<Scalar>{}};
    out.gradient.weights.resize(L);
    out.gradient.biases.resize(L);
    for (std::size_t l = L; l-- > 0;) {
        out.gradient.weights[l] = inputs[l].transpose() * delta;
        out.gradient.biases[l] = delta.colwise().sum();
        if (l > 0) {
            rowmat_type<Scalar> upstream = delta * model.weights[l].transpose();
            delta = upstream.cwiseProduct((inputs[l].array() > Scalar(0)).matrix().template cast<Scalar>());
        }
    }
    return out;
}

struct TrainReport {
    std::vector<double> epoch_losses;  ///< sample-weighted mean loss per epoch
};

template <class Scalar>
struct TrainedProbe {
    ProbeModel<Scalar> model;
    TrainReport report;
};

/// Mini-batch training of a fresh probe. Initialization and per-epoch
/// shuffling are driven only by config.seed. Every class in [0, num_classes)
/// must occur in y.
template <class Scalar>
TrainedProbe<Scalar> train_probe(const Eigen::Ref<const rowmat_type<Scalar>>& X,
                                 std::span<const index_t> y,
                                 index_t num_classes,
                                 const ProbeConfig& config)
{
    config.validate();
    const index_t n = X.rows();
    if (static_cast<index_t>(y.size()) != n) throw Error("train_probe: label count does not match rows");
    if (num_classes < 2) throw Error("train_probe: need at least two classes");
    if (n < num_classes) throw Error("train_probe: fewer samples than classes");
    {
        std::vector<bool> seen(static_cast<std::size_t>(num_classes), false);
        for (auto c : y) {
            if (c < 0 || c >= num_classes) throw Error("train_probe: label out of range");
            seen[static_cast<std::size_t>(c)] = true;
        }
        for (index_t c = 0; c < num_classes; ++c) {
            if (!seen[static_cast<std::size_t>(c)]) throw Error("train_probe: class " + std::to_string(c) + " absent from labels");
        }
    }

    std::vector<index_t> dims{X.cols()};
    dims.insert(dims.end(), config.hidden_layer_sizes.begin(), config.hidden_layer_sizes.end());
    dims.push_back(num_classes);

    Rng rng(config.seed);
    TrainedProbe<Scalar> out{ProbeModel<Scalar>::random(dims, rng), {}};
    ProbeModel<Scalar>& model = out.model;

    ProbeModel<Scalar> m1 = ProbeModel<Scalar>::zeros(dims);
    ProbeModel<Scalar> m2 = ProbeModel<Scalar>::zeros(dims);
    const auto lr = static_cast<Scalar>(config.learning_rate);
    const auto b1 = static_cast<Scalar>(config.adam_beta1);
    const auto b2 = static_cast<Scalar>(config.adam_beta2);
    const auto eps = static_cast<Scalar>(config.adam_epsilon);
    long step = 0;

    std::vector<index_t> order(static_cast<std::size_t>(n));
    for (index_t i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::vector<index_t> batch_rows;
    std::vector<index_t> batch_labels;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(std::span(order));
        double epoch_loss = 0.0;
        int batch_no = 0;
        for (index_t start = 0; start < n; start += config.batch_size, ++batch_no) {
            const index_t stop = std::min(n, start + config.batch_size);
            batch_rows.assign(order.begin() + start, order.begin() + stop);
            batch_labels.clear();
            for (auto r : batch_rows) batch_labels.push_back(y[static_cast<std::size_t>(r)]);
            const rowmat_type<Scalar> Xb = X(batch_rows, Eigen::all);

            auto [loss, grad] = loss_and_grad<Scalar>(model, Xb, batch_labels);
            if (!std::isfinite(static_cast<double>(loss))) {
                throw Error("train_probe: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batch_no));
            }
            epoch_loss += static_cast<double>(loss) * static_cast<double>(stop - start);

            ++step;
            if (config.optimizer == Optimizer::sgd) {
                for (std::size_t l = 0; l < model.num_layers(); ++l) {
                    model.weights[l] -= lr * grad.weights[l];
                    model.biases[l] -= lr * grad.biases[l];
                }
                continue;
            }
            const Scalar c1 = Scalar(1) - static_cast<Scalar>(std::pow(config.adam_beta1, static_cast<double>(step)));
            const Scalar c2 = Scalar(1) - static_cast<Scalar>(std::pow(config.adam_beta2, static_cast<double>(step)));
            const auto adam = [&](auto& param, auto& g, auto& mom1, auto& mom2) {
                mom1 = b1 * mom1 + (Scalar(1) - b1) * g;
                mom2 = b2 * mom2 + (Scalar(1) - b2) * g.cwiseAbs2();
                param.array() -= lr * (mom1.array() / c1) / ((mom2.array() / c2).sqrt() + eps);
            };
            for (std::size_t l = 0; l < model.num_layers(); ++l) {
                adam(model.weights[l], grad.weights[l], m1.weights[l], m2.weights[l]);
                adam(model.biases[l], grad.biases[l], m1.biases[l], m2.biases[l]);
            }
        }
        out.report.epoch_losses.push_back(epoch_loss / static_cast<double>(n));
    }
    return out;
}

/// Per-column standardization fitted on training rows. Constant columns
/// keep scale 1.
template <class Scalar>
struct Standardizer {
    rowvec_type<Scalar> mean;
    rowvec_type<Scalar> scale;

    static Standardizer fit(const Eigen::Ref<const rowmat_type<Scalar>>& X)
    {
        Standardizer s;
        const auto n = static_cast<double>(X.rows());
        const rowvec_type<double> mu = X.template cast<double>().colwise().mean();
        rowvec_type<double> var = rowvec_type<double>::Zero(X.cols());
        for (index_t i = 0; i < X.rows(); ++i) var += (X.row(i).template cast<double>() - mu).cwiseAbs2();
        var /= n;
        s.mean = mu.template cast<Scalar>();
        s.scale.resize(X.cols());
        for (index_t j = 0; j < X.cols(); ++j) {
            const double sd = std::sqrt(var(j));
            s.scale(j) = static_cast<Scalar>(sd > 1e-12 ? sd : 1.0);
        }
        return s;
    }

    rowmat_type<Scalar> apply(const Eigen::Ref<const rowmat_type<Scalar>>& X) const
    {
        return ((X.rowwise() - mean).array().rowwise() / scale.array()).matrix();
    }
};

struct GroupAccuracy {
    std::map<std::string, double> per_group;
    double average = 0.0;  ///< unweighted mean over groups
};

/// Accuracy within each group and their unweighted mean.
GroupAccuracy evaluate_per_group(const ProbeModel<float>& model,
                                 const Eigen::Ref<const rowmat_type<float>>& X,
                                 std::span<const index_t> y,
                                 std::span<const std::string> groups);

/// Same contract from precomputed predictions.
GroupAccuracy group_accuracy(std::span<const index_t> predicted,
                             std::span<const index_t> y,
                             std::span<const std::string> groups);

struct LayerAccuracy {
    std::uint32_t layer = 0;
    std::map<std::string, double> per_group;
    double average = 0.0;
};

struct LayerAccuracyCurve {
    std::string dataset_id;
    Feature feature = Feature::cc;
    std::string config_tag = "baseline";
    std::vector<LayerAccuracy> layers;  ///< index k = layer k, 0 = embedding

    std::vector<double> averages() const
    {
        std::vector<double> v;
        for (const auto& l : layers) v.push_back(l.average);
        return v;
    }
};

struct ProbeLabel {
    index_t target = 0;  ///< class index from assign_class
    std::string group;   ///< CWE label
};

struct ProbeProtocol {
    double val_fraction = 0.2;
    bool equalize_groups = true;  ///< downsample every group to the smallest
    unsigned threads = 1;
};

/// Trains one probe per layer (seed XOR layer index) on a shared seeded
/// stratified split and evaluates each on the held-out rows. Samples whose
/// id has no label are skipped. `layer_order` permutes processing order only.
LayerAccuracyCurve probe_all_layers(std::span<const ActivationTensor> layers,
                                    const std::map<std::string, ProbeLabel>& labels,
                                    const ProbeConfig& config,
                                    const ProbeProtocol& protocol = {},
                                    std::span<const std::size_t> layer_order = {});

} // namespace lpass
