#pragma once

#include <lpass/error.hpp>
#include <lpass/types.hpp>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lpass {

/// Pooled hidden states of one layer: one row per sample.
/// Layer 0 is the embedding output.
struct ActivationTensor {
    std::uint32_t layer_index = 0;
    rowmat_type<float> data;
    std::vector<std::string> sample_ids;

    index_t num_samples() const { return data.rows(); }
    index_t hidden_dim() const { return data.cols(); }

    /// Throws unless ids align with rows, ids are non-empty and newline-free,
    /// and every value is finite.
    void validate() const;

    friend bool operator==(const ActivationTensor& a, const ActivationTensor& b)
    {
        return a.layer_index == b.layer_index && a.sample_ids == b.sample_ids &&
               a.data.rows() == b.data.rows() && a.data.cols() == b.data.cols() &&
               std::equal(a.data.data(), a.data.data() + a.data.size(), b.data.data(),
                          [](float x, float y) { return std::bit_cast<std::uint32_t>(x) == std::bit_cast<std::uint32_t>(y); });
    }
};

// LPT wire format (little-endian):
//   "LPT1" | u32 layer_index | u32 num_samples | u32 hidden_dim |
//   u32 id_block_length | ids joined by '\n' | f32 payload, row-major
inline constexpr std::string_view lpt_magic = "LPT1";
inline constexpr std::size_t lpt_header_bytes = 20;

void write_tensor(const ActivationTensor& tensor, std::ostream& out);
void write_tensor(const ActivationTensor& tensor, const std::filesystem::path& path);
ActivationTensor read_tensor(std::istream& in);
ActivationTensor read_tensor(const std::filesystem::path& path);

enum class Pooling { mean, first_token, last_token };
std::string_view to_string(Pooling p);
Pooling parse_pooling(std::string_view name);

enum class ConfigTag { baseline, quant4, quant8, pruned, pruned_quant4, pruned_quant8 };
std::string_view to_string(ConfigTag c);
ConfigTag parse_config_tag(std::string_view name);

/// Reduces per-token activations, laid out [num_samples, num_tokens, hidden_dim]
/// row-major, to one row per sample using only tokens whose mask bit is set.
template <class Scalar>
rowmat_type<Scalar> pool_tokens(std::span<const Scalar> per_token,
                                const Eigen::Ref<const rowmat_type<bool>>& mask,
                                index_t hidden_dim,
                                Pooling mode)
{
    const index_t num_samples = mask.rows();
    const index_t num_tokens = mask.cols();
    if (static_cast<index_t>(per_token.size()) != num_samples * num_tokens * hidden_dim) {
        throw Error("pool_tokens: activation buffer does not match mask shape");
    }

    rowmat_type<Scalar> pooled(num_samples, hidden_dim);
    for (index_t s = 0; s < num_samples; ++s) {
        const Eigen::Map<const rowmat_type<Scalar>> tokens(per_token.data() + s * num_tokens * hidden_dim,
                                                           num_tokens, hidden_dim);
        const auto valid = mask.row(s);
        const index_t count = valid.count();
        if (count == 0) throw Error("pool_tokens: sample " + std::to_string(s) + " has no valid tokens");

        switch (mode) {
        case Pooling::mean: {
            rowvec_type<Scalar> sum = rowvec_type<Scalar>::Zero(hidden_dim);
            for (index_t t = 0; t < num_tokens; ++t) {
                if (valid(t)) sum += tokens.row(t);
            }
            pooled.row(s) = sum / static_cast<Scalar>(count);
            break;
        }
        case Pooling::first_token: {
            index_t t = 0;
            while (!valid(t)) ++t;
            pooled.row(s) = tokens.row(t);
            break;
        }
        case Pooling::last_token: {
            index_t t = num_tokens - 1;
            while (!valid(t)) --t;
            pooled.row(s) = tokens.row(t);
            break;
        }
        }
    }
    return pooled;
}

/// Describes the tensors of one exported model configuration:
/// layers 0..num_layers, one LPT file each.
struct ActivationSetManifest {
    std::string model_id;
    ConfigTag config_tag = ConfigTag::baseline;
    std::uint32_t num_layers = 0;
    Pooling pooling = Pooling::mean;
    std::vector<std::filesystem::path> layer_files;  ///< as written, relative to the manifest
    std::filesystem::path base_dir;                  ///< directory of the manifest file
};

ActivationSetManifest read_activation_manifest(const std::filesystem::path& path);
void write_activation_manifest(const ActivationSetManifest& manifest, const std::filesystem::path& path);

/// Loads every layer, checking layer indices and identical sample_ids order.
std::vector<ActivationTensor> load_activation_set(const ActivationSetManifest& manifest);

} // namespace lpass
