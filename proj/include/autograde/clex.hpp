#pragma once

// Lossless C lexer. Every input byte ends up in exactly one token, so
// concatenating token texts reproduces the source. Broken code lexes into
// in-band Error tokens instead of failing.

#include <algorithm>
#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace autograde::clex {

enum class TokenKind {
  Keyword,
  Identifier,
  IntLiteral,
  FloatLiteral,
  StringLiteral,
  CharLiteral,
  Punctuator,
  Comment,
  Whitespace,
  Error,
};

inline std::string_view to_string(TokenKind k) {
  switch (k) {
    case TokenKind::Keyword: return "Keyword";
    case TokenKind::Identifier: return "Identifier";
    case TokenKind::IntLiteral: return "IntLiteral";
    case TokenKind::FloatLiteral: return "FloatLiteral";
    case TokenKind::StringLiteral: return "StringLiteral";
    case TokenKind::CharLiteral: return "CharLiteral";
    case TokenKind::Punctuator: return "Punctuator";
    case TokenKind::Comment: return "Comment";
    case TokenKind::Whitespace: return "Whitespace";
    case TokenKind::Error: return "Error";
  }
  return "?";
}

struct Token {
  TokenKind kind;
  std::string text;
  std::size_t line;  // 1-based
  std::size_t col;   // 1-based, in bytes

  bool is(TokenKind k, std::string_view t) const { return kind == k && text == t; }
  bool is_punct(std::string_view t) const { return is(TokenKind::Punctuator, t); }

  friend bool operator==(const Token&, const Token&) = default;
};

struct TokenStream {
  std::vector<Token> tokens;
  std::size_t source_len = 0;
};

inline constexpr std::array<std::string_view, 44> kKeywords = {
    "auto",      "break",     "case",     "char",          "const",        "continue",
    "default",   "do",        "double",   "else",          "enum",         "extern",
    "float",     "for",       "goto",     "if",            "inline",       "int",
    "long",      "register",  "restrict", "return",        "short",        "signed",
    "sizeof",    "static",    "struct",   "switch",        "typedef",      "union",
    "unsigned",  "void",      "volatile", "while",         "_Alignas",     "_Alignof",
    "_Atomic",   "_Bool",     "_Complex", "_Generic",      "_Imaginary",   "_Noreturn",
    "_Static_assert", "_Thread_local",
};

inline bool is_keyword(std::string_view word) {
  return std::find(kKeywords.begin(), kKeywords.end(), word) != kKeywords.end();
}

// Longest first within each length class; matched greedily.
inline constexpr std::array<std::string_view, 3> kPunct3 = {"<<=", ">>=", "..."};
inline constexpr std::array<std::string_view, 19> kPunct2 = {
    "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&",
    "||", "*=", "/=", "%=", "+=", "-=", "&=", "^=", "|=",
};
inline constexpr std::string_view kPunct1 = "[](){}.&*+-~!/%<>^|?:;=,#";

namespace detail {

inline bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}
inline bool is_ident_start(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
inline bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }
inline bool is_ident_char(unsigned char c) { return is_ident_start(c) || is_digit(c); }

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  TokenStream run() {
    TokenStream ts;
    ts.source_len = src_.size();
    while (pos_ < src_.size()) ts.tokens.push_back(next());
    return ts;
  }

 private:
  char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
  }
  bool has(std::size_t ahead) const { return pos_ + ahead < src_.size(); }

  Token make(TokenKind kind, std::size_t end) {
    Token t{kind, std::string(src_.substr(pos_, end - pos_)), line_, col_};
    for (std::size_t i = pos_; i < end; ++i) {
      if (src_[i] == '\n') {
        ++line_;
        col_ = 1;
      } else {
        ++col_;
      }
    }
    pos_ = end;
    return t;
  }

  // Scans a quoted literal whose opening quote is at `open`. Returns the
  // end offset, or npos if the input ends before the closing quote.
  std::size_t scan_quoted(std::size_t open, char quote) const {
    std::size_t i = open + 1;
    while (i < src_.size()) {
      if (src_[i] == '\\') {
        i += 2;
        continue;
      }
      if (src_[i] == quote) return i + 1;
      ++i;
    }
    return std::string_view::npos;
  }

  Token quoted(std::size_t open, char quote) {
    const std::size_t end = scan_quoted(open, quote);
    if (end == std::string_view::npos) return make(TokenKind::Error, src_.size());
    return make(quote == '"' ? TokenKind::StringLiteral : TokenKind::CharLiteral, end);
  }

  Token number() {
    // pp-number: digits, letters, '.', '_' and signed exponents.
    std::size_t i = pos_;
    const bool hex = src_[i] == '0' && i + 1 < src_.size() && (src_[i + 1] == 'x' || src_[i + 1] == 'X');
    bool is_float = false;
    while (i < src_.size()) {
      const unsigned char c = static_cast<unsigned char>(src_[i]);
      if ((c == 'e' || c == 'E') && !hex) {
        is_float = true;
        ++i;
        if (i < src_.size() && (src_[i] == '+' || src_[i] == '-')) ++i;
      } else if ((c == 'p' || c == 'P') && hex) {
        is_float = true;
        ++i;
        if (i < src_.size() && (src_[i] == '+' || src_[i] == '-')) ++i;
      } else if (c == '.') {
        is_float = true;
        ++i;
      } else if (is_ident_char(c)) {
        ++i;
      } else {
        break;
      }
    }
    return make(is_float ? TokenKind::FloatLiteral : TokenKind::IntLiteral, i);
  }

  Token next() {
    const unsigned char c = static_cast<unsigned char>(peek());

    if (is_space(c)) {
      std::size_t i = pos_;
      while (i < src_.size() && is_space(static_cast<unsigned char>(src_[i]))) ++i;
      return make(TokenKind::Whitespace, i);
    }

    if (c == '/' && peek(1) == '/') {
      const std::size_t nl = src_.find('\n', pos_);
      return make(TokenKind::Comment, nl == std::string_view::npos ? src_.size() : nl);
    }
    if (c == '/' && peek(1) == '*') {
      const std::size_t close = src_.find("*/", pos_ + 2);
      if (close == std::string_view::npos) return make(TokenKind::Error, src_.size());
      return make(TokenKind::Comment, close + 2);
    }

    if (c == '"' || c == '\'') return quoted(pos_, static_cast<char>(c));

    if (is_ident_start(c)) {
      std::size_t i = pos_;
      while (i < src_.size() && is_ident_char(static_cast<unsigned char>(src_[i]))) ++i;
      const std::string_view word = src_.substr(pos_, i - pos_);
      // Encoding prefixes glue onto the following literal.
      if (i < src_.size() && (src_[i] == '"' || src_[i] == '\'') &&
          (word == "L" || word == "u" || word == "U" || word == "u8")) {
        if (word == "u8" && src_[i] == '\'') {
          // u8 character constants are C23; lex the prefix as an identifier.
        } else {
          const std::size_t end = scan_quoted(i, src_[i]);
          if (end == std::string_view::npos) return make(TokenKind::Error, src_.size());
          return make(src_[i] == '"' ? TokenKind::StringLiteral : TokenKind::CharLiteral, end);
        }
      }
      return make(is_keyword(word) ? TokenKind::Keyword : TokenKind::Identifier, i);
    }

    if (is_digit(c) || (c == '.' && is_digit(static_cast<unsigned char>(peek(1))))) return number();

    const std::string_view rest = src_.substr(pos_);
    for (auto p : kPunct3) {
      if (rest.starts_with(p)) return make(TokenKind::Punctuator, pos_ + p.size());
    }
    for (auto p : kPunct2) {
      if (rest.starts_with(p)) return make(TokenKind::Punctuator, pos_ + p.size());
    }
    if (kPunct1.find(static_cast<char>(c)) != std::string_view::npos) {
      return make(TokenKind::Punctuator, pos_ + 1);
    }

    // Stray bytes ('@', '$', '`', '\\', control or non-ASCII) group into one
    // Error token.
    std::size_t i = pos_ + 1;
    while (i < src_.size()) {
      const unsigned char d = static_cast<unsigned char>(src_[i]);
      const bool stray = !is_space(d) && !is_ident_start(d) && !is_digit(d) && d != '"' &&
                         d != '\'' && kPunct1.find(static_cast<char>(d)) == std::string_view::npos;
      if (!stray) break;
      ++i;
    }
    return make(TokenKind::Error, i);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
};

}  // namespace detail

inline TokenStream tokenize(std::string_view code) { return detail::Lexer(code).run(); }

inline std::string detokenize(const TokenStream& ts) {
  std::string out;
  out.reserve(ts.source_len);
  for (const auto& t : ts.tokens) out += t.text;
  return out;
}

inline std::string detokenize(const std::vector<Token>& tokens) {
  std::string out;
  for (const auto& t : tokens) out += t.text;
  return out;
}

inline std::vector<Token> significant_tokens(const TokenStream& ts) {
  std::vector<Token> out;
  for (const auto& t : ts.tokens) {
    if (t.kind != TokenKind::Whitespace && t.kind != TokenKind::Comment) out.push_back(t);
  }
  return out;
}

inline std::size_t count_errors(const TokenStream& ts) {
  return static_cast<std::size_t>(std::count_if(
      ts.tokens.begin(), ts.tokens.end(), [](const Token& t) { return t.kind == TokenKind::Error; }));
}

}  // namespace autograde::clex
