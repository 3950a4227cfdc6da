#include <lpass/error.hpp>
#include <lpass/metrics.hpp>

#include <algorithm>
#include <array>
#include <unordered_set>

namespace lpass {

std::string_view to_string(TokenKind kind)
{
    switch (kind) {
    case TokenKind::identifier: return "identifier";
    case TokenKind::keyword: return "keyword";
    case TokenKind::number_literal: return "number-literal";
    case TokenKind::string_literal: return "string-literal";
    case TokenKind::char_literal: return "char-literal";
    case TokenKind::punctuator: return "punctuator";
    case TokenKind::comment: return "comment";
    case TokenKind::whitespace: return "whitespace";
    }
    return "unknown";
}

bool is_c_keyword(std::string_view word)
{
    static const std::unordered_set<std::string_view> keywords = {
        // C
        "auto", "break", "case", "char", "const", "continue", "default", "do", "double", "else", "enum",
        "extern", "float", "for", "goto", "if", "inline", "int", "long", "register", "restrict", "return",
        "short", "signed", "sizeof", "static", "struct", "switch", "typedef", "union", "unsigned", "void",
        "volatile", "while", "_Alignas", "_Alignof", "_Atomic", "_Bool", "_Complex", "_Generic",
        "_Imaginary", "_Noreturn", "_Static_assert", "_Thread_local",
        // C++
        "alignas", "alignof", "asm", "bool", "catch", "char8_t", "char16_t", "char32_t", "class",
        "concept", "consteval", "constexpr", "constinit", "const_cast", "co_await", "co_return",
        "co_yield", "decltype", "delete", "dynamic_cast", "explicit", "export", "false", "friend",
        "mutable", "namespace", "new", "noexcept", "nullptr", "operator", "private", "protected",
        "public", "reinterpret_cast", "requires", "static_assert", "static_cast", "template", "this",
        "thread_local", "throw", "true", "try", "typeid", "typename", "using", "virtual", "wchar_t",
    };
    return keywords.contains(word);
}

namespace {

// Longest first within each leading character is not required; the scan
// below tries every entry and keeps the longest match.
constexpr std::array<std::string_view, 46> multi_char_punctuators = {
    "<=>", "<<=", ">>=", "...", "->*", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||",
    "+=",  "-=",  "*=",  "/=",  "%=",  "&=", "^=", "|=", "::", ".*", "##", "<:", ":>", "<%", "%>", "%:",
    "+",   "-",   "*",   "/",   "%",   "&",  "|",  "^",  "!",  "~",  "=",  "<",  ">",  "?",
};

bool is_ident_start(unsigned char c) { return std::isalpha(c) || c == '_' || c == '$' || c >= 0x80; }
bool is_ident_char(unsigned char c) { return std::isalnum(c) || c == '_' || c == '$' || c >= 0x80; }
bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

bool is_literal_prefix(std::string_view word)
{
    return word == "L" || word == "u" || word == "U" || word == "u8" || word == "R" || word == "LR" ||
           word == "uR" || word == "UR" || word == "u8R";
}

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::vector<Token> run()
    {
        while (pos_ < src_.size()) step();
        return std::move(tokens_);
    }

private:
    unsigned char peek(std::size_t ahead = 0) const
    {
        return pos_ + ahead < src_.size() ? static_cast<unsigned char>(src_[pos_ + ahead]) : '\0';
    }

    bool line_continuation_at(std::size_t p) const
    {
        if (p >= src_.size() || src_[p] != '\\') return false;
        if (p + 1 < src_.size() && src_[p + 1] == '\n') return true;
        return p + 2 < src_.size() && src_[p + 1] == '\r' && src_[p + 2] == '\n';
    }

    void emit(TokenKind kind, std::size_t begin)
    {
        Token t{kind, std::string(src_.substr(begin, pos_ - begin)), line_, in_directive_};
        for (char c : t.text) {
            if (c == '\n') ++line_;
        }
        if (kind != TokenKind::whitespace && kind != TokenKind::comment) at_line_start_ = false;
        tokens_.push_back(std::move(t));
    }

    void step()
    {
        const std::size_t begin = pos_;
        const unsigned char c = peek();

        if (is_space(c) || line_continuation_at(pos_)) {
            lex_whitespace();
            return;
        }
        if (c == '/' && peek(1) == '/') {
            lex_line_comment();
            return;
        }
        if (c == '/' && peek(1) == '*') {
            lex_block_comment();
            return;
        }
        if (c == '#' && at_line_start_ && !in_directive_) {
            in_directive_ = true;
        }
        if (std::isdigit(c) || (c == '.' && std::isdigit(peek(1)))) {
            lex_number();
            emit(TokenKind::number_literal, begin);
            return;
        }
        if (is_ident_start(c)) {
            while (pos_ < src_.size() && is_ident_char(peek())) ++pos_;
            const auto word = src_.substr(begin, pos_ - begin);
            if (is_literal_prefix(word) && (peek() == '"' || (peek() == '\'' && word.find('R') == std::string_view::npos))) {
                lex_quoted(begin, word.find('R') != std::string_view::npos);
                return;
            }
            emit(is_c_keyword(word) ? TokenKind::keyword : TokenKind::identifier, begin);
            return;
        }
        if (c == '"' || c == '\'') {
            lex_quoted(begin, false);
            return;
        }
        lex_punctuator();
        emit(TokenKind::punctuator, begin);
    }

    void lex_whitespace()
    {
        const std::size_t begin = pos_;
        while (pos_ < src_.size()) {
            if (line_continuation_at(pos_)) {
                pos_ += src_[pos_ + 1] == '\r' ? 3 : 2;
                continue;
            }
            const unsigned char c = peek();
            if (!is_space(c)) break;
            ++pos_;
            if (c == '\n') {
                // A directive ends at the first unescaped newline.
                emit(TokenKind::whitespace, begin);
                in_directive_ = false;
                at_line_start_ = true;
                return;
            }
        }
        emit(TokenKind::whitespace, begin);
    }

    void lex_line_comment()
    {
        const std::size_t begin = pos_;
        while (pos_ < src_.size()) {
            if (line_continuation_at(pos_)) {
                pos_ += src_[pos_ + 1] == '\r' ? 3 : 2;
                continue;
            }
            if (peek() == '\n') break;
            ++pos_;
        }
        emit(TokenKind::comment, begin);
    }

    void lex_block_comment()
    {
        const std::size_t begin = pos_;
        const auto end = src_.find("*/", pos_ + 2);
        if (end == std::string_view::npos) {
            throw Error("unterminated block comment starting at line " + std::to_string(line_));
        }
        pos_ = end + 2;
        emit(TokenKind::comment, begin);
    }

    void lex_number()
    {
        ++pos_;
        while (pos_ < src_.size()) {
            const unsigned char c = peek();
            if ((c == '+' || c == '-') && pos_ > 0) {
                const unsigned char prev = static_cast<unsigned char>(src_[pos_ - 1]);
                if (prev == 'e' || prev == 'E' || prev == 'p' || prev == 'P') {
                    ++pos_;
                    continue;
                }
                break;
            }
            if (c == '\'' && is_ident_char(peek(1))) {
                pos_ += 2;
                continue;
            }
            if (is_ident_char(c) || c == '.') {
                ++pos_;
                continue;
            }
            break;
        }
    }

    // pos_ sits on the opening quote; begin covers any encoding prefix.
    void lex_quoted(std::size_t begin, bool raw)
    {
        const char quote = src_[pos_];
        const auto kind = quote == '"' ? TokenKind::string_literal : TokenKind::char_literal;
        const std::uint32_t start_line = line_;

        if (raw) {
            const auto open = src_.find('(', pos_ + 1);
            if (open == std::string_view::npos) {
                throw Error("malformed raw string literal at line " + std::to_string(start_line));
            }
            const std::string terminator = ")" + std::string(src_.substr(pos_ + 1, open - pos_ - 1)) + "\"";
            const auto close = src_.find(terminator, open + 1);
            if (close == std::string_view::npos) {
                throw Error("unterminated raw string literal starting at line " + std::to_string(start_line));
            }
            pos_ = close + terminator.size();
            emit(kind, begin);
            return;
        }

        ++pos_;
        while (true) {
            if (pos_ >= src_.size() || peek() == '\n') {
                if (in_directive_) {
                    // Directive text such as `#error don't` is not C; keep the
                    // stray quote as a punctuator and continue lexing.
                    pos_ = begin + (src_[begin] == quote ? 1 : 0);
                    if (pos_ == begin) {
                        while (src_[pos_] != quote) ++pos_;
                        emit(TokenKind::identifier, begin);
                        const std::size_t q = pos_++;
                        emit(TokenKind::punctuator, q);
                    } else {
                        emit(TokenKind::punctuator, begin);
                    }
                    return;
                }
                throw Error(std::string("unterminated ") +
                            (kind == TokenKind::string_literal ? "string" : "character") +
                            " literal starting at line " + std::to_string(start_line));
            }
            const char c = src_[pos_];
            if (c == '\\') {
                pos_ += 2;
                if (pos_ > src_.size()) pos_ = src_.size();
                continue;
            }
            ++pos_;
            if (c == quote) break;
        }
        emit(kind, begin);
    }

    void lex_punctuator()
    {
        std::size_t best = 1;
        const auto rest = src_.substr(pos_);
        for (const auto p : multi_char_punctuators) {
            if (p.size() > best && rest.starts_with(p)) best = p.size();
        }
        pos_ += best;
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    std::uint32_t line_ = 1;
    bool at_line_start_ = true;
    bool in_directive_ = false;
    std::vector<Token> tokens_;
};

} // namespace

std::vector<Token> tokenize_c(std::string_view source) { return Lexer(source).run(); }

} // namespace lpass
