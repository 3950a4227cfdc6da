#include <lpass/error.hpp>
#include <lpass/metrics.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace lpass {

namespace {

bool is_significant(const Token& t)
{
    return t.kind != TokenKind::whitespace && t.kind != TokenKind::comment && !t.preprocessor;
}

bool is_operand(const Token& t)
{
    switch (t.kind) {
    case TokenKind::identifier:
    case TokenKind::number_literal:
    case TokenKind::string_literal:
    case TokenKind::char_literal: return true;
    default: return false;
    }
}

bool is_closer(std::string_view text) { return text == ")" || text == "]" || text == "}"; }

} // namespace

int cyclomatic_complexity(std::span<const Token> tokens)
{
    std::vector<const Token*> code;
    for (const auto& t : tokens) {
        if (is_significant(t)) code.push_back(&t);
    }

    int decisions = 0;
    for (std::size_t i = 0; i < code.size(); ++i) {
        const Token& t = *code[i];
        if (t.kind == TokenKind::keyword) {
            if (t.text == "if" || t.text == "for" || t.text == "while" || t.text == "case" || t.text == "catch") {
                ++decisions;
            } else if (t.text == "default" && i + 1 < code.size() && code[i + 1]->text == ":") {
                ++decisions;
            }
        } else if (t.kind == TokenKind::punctuator) {
            if (t.text == "&&" || t.text == "||" || t.text == "?") ++decisions;
        }
    }
    return 1 + decisions;
}

FunctionMetrics halstead_metrics(std::span<const Token> tokens)
{
    std::set<std::string_view> operators;
    std::set<std::string_view> operands;
    FunctionMetrics m;
    for (const auto& t : tokens) {
        if (!is_significant(t)) continue;
        if (is_operand(t)) {
            operands.insert(t.text);
            ++m.N2;
        } else if (t.kind == TokenKind::keyword || (t.kind == TokenKind::punctuator && !is_closer(t.text))) {
            operators.insert(t.text);
            ++m.N1;
        }
    }
    m.n1 = operators.size();
    m.n2 = operands.size();
    m.hd = m.n2 == 0 ? 0.0 : (static_cast<double>(m.n1) / 2.0) * (static_cast<double>(m.N2) / static_cast<double>(m.n2));
    return m;
}

FunctionMetrics function_metrics(std::string_view source)
{
    const auto tokens = tokenize_c(source);
    auto m = halstead_metrics(tokens);
    m.cc = cyclomatic_complexity(tokens);
    return m;
}

std::string_view to_string(Feature f) { return f == Feature::cc ? "CC" : "HD"; }

Feature parse_feature(std::string_view name)
{
    if (name == "CC" || name == "cc") return Feature::cc;
    if (name == "HD" || name == "hd") return Feature::hd;
    throw Error("unknown feature '" + std::string(name) + "' (expected CC or HD)");
}

BinningScheme derive_bins(std::span<const double> values, Feature feature, double coverage, double bin_width)
{
    if (values.empty()) throw Error("derive_bins: no values");
    if (!(coverage > 0.0 && coverage <= 1.0)) throw Error("derive_bins: coverage must lie in (0, 1]");
    if (!(bin_width > 0.0) || !std::isfinite(bin_width)) throw Error("derive_bins: bin width must be positive");

    std::vector<double> retained;
    for (double v : values) {
        if (!std::isfinite(v)) throw Error("derive_bins: non-finite value");
        if (v >= 1.0) retained.push_back(v);
    }
    if (retained.empty()) throw Error("derive_bins: every value was discarded (integer part 0)");
    std::sort(retained.begin(), retained.end());

    const double total = static_cast<double>(retained.size());
    BinningScheme scheme;
    scheme.feature = feature;
    scheme.coverage = coverage;
    {
        std::ostringstream rule;
        rule << "values below 1 (integer part 0) discarded; bins of width " << bin_width << " from 1";
        scheme.discarded_rule = rule.str();
    }

    // Bin edges are computed as 1 + k*width rather than accumulated so that
    // integer widths give exact integer edges.
    std::size_t covered = 0;
    for (std::size_t k = 0; covered < retained.size(); ++k) {
        const double lower = 1.0 + static_cast<double>(k) * bin_width;
        const double upper = 1.0 + static_cast<double>(k + 1) * bin_width;
        covered = static_cast<std::size_t>(std::lower_bound(retained.begin(), retained.end(), upper) - retained.begin());
        scheme.boundaries.push_back({lower, upper});
        if (static_cast<double>(covered) >= coverage * total * (1.0 - 1e-12)) break;
    }
    return scheme;
}

std::optional<std::size_t> assign_class(double value, const BinningScheme& scheme)
{
    if (!(value >= 1.0)) return std::nullopt;
    for (std::size_t i = 0; i < scheme.boundaries.size(); ++i) {
        const auto& b = scheme.boundaries[i];
        if (value >= b.lower && value < b.upper) return i;
    }
    return std::nullopt;
}

} // namespace lpass
