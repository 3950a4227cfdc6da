#pragma once

#include <lpass/types.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lpass {

inline constexpr std::string_view no_cwe_label = "NoCWE";

/// One C/C++ function with its dataset and vulnerability label.
struct CodeSample {
    std::string id;
    std::string source_text;
    std::string cwe_label;   ///< "NoCWE" or "CWE-<n>"
    std::string dataset_id;
    std::optional<std::uint64_t> token_count;
};

/// True for "NoCWE" and for "CWE-<positive integer>".
bool is_valid_cwe_label(std::string_view label);

/// Numeric part of a "CWE-<n>" label; nullopt for NoCWE or malformed labels.
std::optional<std::uint64_t> cwe_number(std::string_view label);

/// Parses a JSON Lines manifest (`id`, `source`, `cwe`, `dataset`, optional
/// `tokens`). Blank lines are skipped; errors name the 1-based line number.
std::vector<CodeSample> parse_manifest(std::istream& in);
std::vector<CodeSample> load_manifest(const std::filesystem::path& path);

void write_manifest(std::ostream& out, std::span<const CodeSample> samples);

/// Keeps samples with token_count <= max_tokens and a label in allowed_cwes,
/// preserving order. Throws if any sample lacks a token count.
std::vector<CodeSample> filter_samples(std::span<const CodeSample> samples,
                                       std::uint64_t max_tokens,
                                       const std::set<std::string>& allowed_cwes);

/// Approximate token count: one token per identifier/number run and one per
/// other non-space byte. Only a fallback when no model tokenizer count exists.
std::uint64_t estimate_token_count(std::string_view source);

/// Fills missing token counts with estimate_token_count; returns how many.
std::size_t fill_token_estimates(std::vector<CodeSample>& samples);

struct TopCwes {
    std::vector<std::string> labels;
    bool fewer_than_requested = false;
};

/// The n most frequent CWE labels (NoCWE excluded), descending by count with
/// ties broken by ascending CWE number.
TopCwes select_top_cwes(std::span<const CodeSample> samples, std::size_t n);

struct SplitPlan {
    std::vector<std::string> train_ids;  ///< may repeat (oversampling)
    std::vector<std::string> val_ids;    ///< distinct
    std::size_t per_class_limit = 0;
    seed_t seed = 0;

    friend bool operator==(const SplitPlan&, const SplitPlan&) = default;
};

/// Carves val_fraction of every class's distinct samples into validation,
/// then brings each class's training portion to exactly per_class_limit
/// entries: cyclic copying when short, seeded sampling without replacement
/// when long. Classes are emitted in ascending label order.
SplitPlan balance_classes(std::span<const CodeSample> samples,
                          std::size_t per_class_limit,
                          double val_fraction,
                          seed_t seed);

} // namespace lpass
