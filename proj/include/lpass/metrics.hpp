#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lpass {

enum class TokenKind {
    identifier,
    keyword,
    number_literal,
    string_literal,
    char_literal,
    punctuator,
    comment,
    whitespace,
};

std::string_view to_string(TokenKind kind);

struct Token {
    TokenKind kind;
    std::string text;
    std::uint32_t line = 1;      ///< 1-based line of the first byte
    bool preprocessor = false;   ///< part of a `#` directive line

    friend bool operator==(const Token&, const Token&) = default;
};

/// Lossless lexer for C/C++ function bodies. Concatenating every token's text
/// reproduces the input exactly. Throws lpass::Error on unterminated string,
/// character literal or block comment, naming the line where it starts.
std::vector<Token> tokenize_c(std::string_view source);

bool is_c_keyword(std::string_view word);

/// McCabe complexity: 1 + if/for/while/case/catch, `default` switch labels,
/// and the `&&`, `||`, `?` punctuators. Directive lines are ignored.
int cyclomatic_complexity(std::span<const Token> tokens);

struct FunctionMetrics {
    int cc = 1;
    std::size_t n1 = 0;  ///< distinct operators
    std::size_t n2 = 0;  ///< distinct operands
    std::size_t N1 = 0;  ///< operator occurrences
    std::size_t N2 = 0;  ///< operand occurrences
    double hd = 0.0;     ///< Halstead difficulty (n1/2)·(N2/n2)
};

/// Halstead counts with cc left at 1. Operands are identifiers and literals;
/// operators are keywords and punctuators except the closers `)` `]` `}`.
FunctionMetrics halstead_metrics(std::span<const Token> tokens);

/// Tokenizes once and fills both CC and the Halstead fields.
FunctionMetrics function_metrics(std::string_view source);

enum class Feature { cc, hd };

std::string_view to_string(Feature f);
Feature parse_feature(std::string_view name);

/// Half-open [lower, upper).
struct BinInterval {
    double lower;
    double upper;

    friend bool operator==(const BinInterval&, const BinInterval&) = default;
};

struct BinningScheme {
    Feature feature = Feature::cc;
    std::vector<BinInterval> boundaries;
    double coverage = 0.85;
    std::string discarded_rule;

    std::size_t num_classes() const { return boundaries.size(); }
};

/// Drops values whose integer part is 0 (anything below 1), then lays down
/// contiguous bins of `bin_width` starting at 1 until the retained values
/// they contain reach the requested coverage.
BinningScheme derive_bins(std::span<const double> values, Feature feature, double coverage, double bin_width);

/// Index of the interval containing value, or nullopt (discarded).
std::optional<std::size_t> assign_class(double value, const BinningScheme& scheme);

} // namespace lpass
