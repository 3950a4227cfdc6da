#include <lpass/dataset.hpp>
#include <lpass/error.hpp>
#include <lpass/random.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <unordered_set>

namespace lpass {

using nlohmann::json;

bool is_valid_cwe_label(std::string_view label)
{
    return label == no_cwe_label || cwe_number(label).has_value();
}

std::optional<std::uint64_t> cwe_number(std::string_view label)
{
    constexpr std::string_view prefix = "CWE-";
    if (!label.starts_with(prefix)) return std::nullopt;
    const auto digits = label.substr(prefix.size());
    if (digits.empty() || digits.front() == '0') return std::nullopt;
    std::uint64_t value = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (ec != std::errc{} || ptr != digits.data() + digits.size()) return std::nullopt;
    return value;
}

namespace {

std::string required_string(const json& record, const char* field, std::size_t line_no)
{
    const auto it = record.find(field);
    if (it == record.end() || !it->is_string()) {
        throw Error("manifest line " + std::to_string(line_no) + ": missing or non-string field '" +
                    field + "'");
    }
    return it->get<std::string>();
}

bool is_blank(std::string_view s)
{
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

} // namespace

std::vector<CodeSample> parse_manifest(std::istream& in)
{
    std::vector<CodeSample> samples;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;

        json record;
        try {
            record = json::parse(line);
        } catch (const json::parse_error& e) {
            throw Error("manifest line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!record.is_object()) {
            throw Error("manifest line " + std::to_string(line_no) + ": record is not an object");
        }

        CodeSample s;
        s.id = required_string(record, "id", line_no);
        s.source_text = required_string(record, "source", line_no);
        s.cwe_label = required_string(record, "cwe", line_no);
        s.dataset_id = required_string(record, "dataset", line_no);
        if (!is_valid_cwe_label(s.cwe_label)) {
            throw Error("manifest line " + std::to_string(line_no) + ": invalid cwe label '" +
                        s.cwe_label + "'");
        }
        if (const auto it = record.find("tokens"); it != record.end() && !it->is_null()) {
            if (!it->is_number_unsigned()) {
                throw Error("manifest line " + std::to_string(line_no) +
                            ": 'tokens' must be a nonnegative integer");
            }
            s.token_count = it->get<std::uint64_t>();
        }
        if (!seen.insert(s.id).second) throw Error("duplicate sample id '" + s.id + "'");
        samples.push_back(std::move(s));
    }
    return samples;
}

std::vector<CodeSample> load_manifest(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open manifest " + path.string());
    return parse_manifest(in);
}

void write_manifest(std::ostream& out, std::span<const CodeSample> samples)
{
    for (const auto& s : samples) {
        json record = {{"id", s.id}, {"source", s.source_text}, {"cwe", s.cwe_label}, {"dataset", s.dataset_id}};
        if (s.token_count) record["tokens"] = *s.token_count;
        out << record.dump() << '\n';
    }
}

std::vector<CodeSample> filter_samples(std::span<const CodeSample> samples,
                                       std::uint64_t max_tokens,
                                       const std::set<std::string>& allowed_cwes)
{
    if (max_tokens == 0) throw Error("max_tokens must be positive");
    std::vector<CodeSample> kept;
    for (const auto& s : samples) {
        if (!s.token_count) {
            throw Error("sample '" + s.id + "' has no token count; run the exporter or a token estimate first");
        }
        if (*s.token_count <= max_tokens && allowed_cwes.contains(s.cwe_label)) kept.push_back(s);
    }
    return kept;
}

std::uint64_t estimate_token_count(std::string_view source)
{
    std::uint64_t count = 0;
    std::size_t i = 0;
    const auto is_word = [](unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; };
    while (i < source.size()) {
        const auto c = static_cast<unsigned char>(source[i]);
        if (std::isspace(c)) {
            ++i;
        } else if (is_word(c)) {
            while (i < source.size() && is_word(static_cast<unsigned char>(source[i]))) ++i;
            ++count;
        } else {
            ++i;
            ++count;
        }
    }
    return count;
}

std::size_t fill_token_estimates(std::vector<CodeSample>& samples)
{
    std::size_t filled = 0;
    for (auto& s : samples) {
        if (!s.token_count) {
            s.token_count = estimate_token_count(s.source_text);
            ++filled;
        }
    }
    return filled;
}

TopCwes select_top_cwes(std::span<const CodeSample> samples, std::size_t n)
{
    if (n == 0) throw Error("select_top_cwes: n must be at least 1");
    std::map<std::string, std::size_t> counts;
    for (const auto& s : samples) {
        if (s.cwe_label != no_cwe_label) ++counts[s.cwe_label];
    }
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return cwe_number(a.first).value_or(0) < cwe_number(b.first).value_or(0);
    });

    TopCwes top;
    top.fewer_than_requested = ranked.size() < n;
    for (std::size_t i = 0; i < std::min(n, ranked.size()); ++i) top.labels.push_back(ranked[i].first);
    return top;
}

SplitPlan balance_classes(std::span<const CodeSample> samples,
                          std::size_t per_class_limit,
                          double val_fraction,
                          seed_t seed)
{
    if (per_class_limit == 0) throw Error("per_class_limit must be positive");
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw Error("val_fraction must lie in (0, 1)");

    // Indices into `samples`, file order within each class.
    std::map<std::string, std::vector<std::size_t>> classes;
    for (std::size_t i = 0; i < samples.size(); ++i) classes[samples[i].cwe_label].push_back(i);

    SplitPlan plan;
    plan.per_class_limit = per_class_limit;
    plan.seed = seed;
    Rng rng(seed);

    for (const auto& [label, members] : classes) {
        const std::size_t n = members.size();
        if (n < 2) throw Error("class '" + label + "' has fewer than 2 samples");

        auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
        n_val = std::clamp<std::size_t>(n_val, 1, n - 1);

        std::vector<std::size_t> order(members);
        rng.shuffle(std::span(order));
        std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
        std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
        std::sort(val.begin(), val.end());
        std::sort(train.begin(), train.end());

        if (train.size() > per_class_limit) {
            rng.shuffle(std::span(train));
            train.resize(per_class_limit);
            std::sort(train.begin(), train.end());
        }
        for (std::size_t k = 0; k < per_class_limit; ++k) {
            plan.train_ids.push_back(samples[train[k % train.size()]].id);
        }
        for (auto i : val) plan.val_ids.push_back(samples[i].id);
    }
    return plan;
}

} // namespace lpass
