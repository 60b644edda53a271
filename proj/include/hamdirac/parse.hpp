#pragma once

#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "chart.hpp"
#include "expr.hpp"
#include "rational.hpp"
#include "variational.hpp"

namespace hamdirac {

/// Half-open byte range into the parsed input.
struct SourceSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  friend bool operator==(const SourceSpan&, const SourceSpan&) = default;
};

enum class ParseErrorKind {
  UnexpectedToken,
  UnknownIdentifier,
  BadNumber,
  UnmatchedParenthesis,
  EmptyInput,
};

struct ParseError {
  SourceSpan span;
  ParseErrorKind kind = ParseErrorKind::UnexpectedToken;
  std::string message;
};

/// Value-or-error result; parsing reports problems as data, it never throws.
template <typename T>
struct ParseResult {
  std::optional<T> value;
  std::optional<ParseError> error;

  bool ok() const { return value.has_value(); }
  explicit operator bool() const { return ok(); }
  const T& operator*() const { return *value; }
  const T* operator->() const { return &*value; }

  static ParseResult success(T v) { return {std::move(v), std::nullopt}; }
  static ParseResult failure(ParseError e) { return {std::nullopt, std::move(e)}; }
};

namespace detail {

/// Internal carrier so the recursive-descent code can unwind to the API
/// boundary; parse_expr converts it into a ParseResult.
struct ParseAbort {
  ParseError error;
};

[[noreturn]] inline void abort_parse(SourceSpan span, ParseErrorKind kind,
                                     std::string message) {
  throw ParseAbort{ParseError{span, kind, std::move(message)}};
}

struct Token {
  enum class Kind {
    Number,  // digit run (sign handled by the grammar)
    Ident,   // identifier with 0..2 trailing apostrophes
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
  };
  Kind kind = Kind::End;
  SourceSpan span;
  std::string_view text;
};

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  Token next() {
    while (pos_ < text_.size() && is_space(text_[pos_])) ++pos_;
    const std::size_t start = pos_;
    if (pos_ >= text_.size()) return make(Token::Kind::End, start, start);

    const char c = text_[pos_];
    if (is_digit(c)) {
      while (pos_ < text_.size() && is_digit(text_[pos_])) ++pos_;
      return make(Token::Kind::Number, start, pos_);
    }
    if (is_alpha(c)) {
      while (pos_ < text_.size() && is_ident(text_[pos_])) ++pos_;
      int quotes = 0;
      while (quotes < 2 && pos_ < text_.size() && text_[pos_] == '\'') {
        ++pos_;
        ++quotes;
      }
      return make(Token::Kind::Ident, start, pos_);
    }
    ++pos_;
    switch (c) {
      case '+': return make(Token::Kind::Plus, start, pos_);
      case '-': return make(Token::Kind::Minus, start, pos_);
      case '*': return make(Token::Kind::Star, start, pos_);
      case '/': return make(Token::Kind::Slash, start, pos_);
      case '^': return make(Token::Kind::Caret, start, pos_);
      case '(': return make(Token::Kind::LParen, start, pos_);
      case ')': return make(Token::Kind::RParen, start, pos_);
      case '.':
        abort_parse({start, pos_}, ParseErrorKind::BadNumber,
                    "floating-point literals are not supported; write an "
                    "exact rational like 1/2");
      default:
        abort_parse({start, pos_}, ParseErrorKind::UnexpectedToken,
                    "unexpected character '" + std::string(1, c) + "'");
    }
  }

 private:
  static bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n';
  }
  static bool is_digit(char c) { return c >= '0' && c <= '9'; }
  static bool is_alpha(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
  }
  static bool is_ident(char c) { return is_alpha(c) || is_digit(c) || c == '_'; }

  Token make(Token::Kind kind, std::size_t b, std::size_t e) {
    return Token{kind, {b, e}, text_.substr(b, e - b)};
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

/// Recursive-descent parser for
///   expr   := term (('+'|'-') term)*
///   term   := factor ('*' factor)*
///   factor := ['-'] atom ['^' uint]
///   atom   := rational | ident | '(' expr ')'
///   rational := uint ['/' uint]
/// No implicit multiplication; '/' only inside rational literals.
class ExprParser {
 public:
  // Nesting and exponent caps keep adversarial inputs from exhausting the
  // stack or memory; both are far beyond anything a mechanics problem needs.
  static constexpr int kMaxDepth = 256;
  static constexpr std::uint32_t kMaxExponent = 512;

  ExprParser(std::string_view text, ChartPtr chart)
      : lexer_(text), chart_(std::move(chart)) {
    advance();
  }

  Expr parse_all() {
    if (current_.kind == Token::Kind::End) {
      abort_parse(current_.span, ParseErrorKind::EmptyInput,
                  "empty expression");
    }
    Expr e = parse_expr();
    if (current_.kind == Token::Kind::RParen) {
      abort_parse(current_.span, ParseErrorKind::UnmatchedParenthesis,
                  "')' without a matching '('");
    }
    if (current_.kind != Token::Kind::End) {
      if (current_.kind == Token::Kind::Slash) {
        abort_parse(current_.span, ParseErrorKind::UnexpectedToken,
                    "'/' is only allowed inside rational literals");
      }
      abort_parse(current_.span, ParseErrorKind::UnexpectedToken,
                  "unexpected '" + std::string(current_.text) + "'");
    }
    return e;
  }

 private:
  Expr parse_expr() {
    DepthGuard guard(this);
    Expr acc = parse_term();
    while (current_.kind == Token::Kind::Plus ||
           current_.kind == Token::Kind::Minus) {
      const bool minus = current_.kind == Token::Kind::Minus;
      advance();
      Expr rhs = parse_term();
      acc = minus ? acc - rhs : acc + rhs;
    }
    return acc;
  }

  Expr parse_term() {
    DepthGuard guard(this);
    Expr acc = parse_factor();
    while (current_.kind == Token::Kind::Star) {
      advance();
      acc = acc * parse_factor();
    }
    return acc;
  }

  Expr parse_factor() {
    DepthGuard guard(this);
    bool negate = false;
    if (current_.kind == Token::Kind::Minus) {
      negate = true;
      advance();
    }
    Expr base = parse_atom();
    if (current_.kind == Token::Kind::Caret) {
      advance();
      base = pow(base, expect_exponent());
    }
    return negate ? -base : base;
  }

  Expr parse_atom() {
    DepthGuard guard(this);
    switch (current_.kind) {
      case Token::Kind::Number: {
        BigInt num = big_from(current_);
        advance();
        if (current_.kind == Token::Kind::Slash) {
          advance();
          if (current_.kind != Token::Kind::Number) {
            abort_parse(current_.span, ParseErrorKind::BadNumber,
                        "expected a denominator after '/'");
          }
          BigInt den = big_from(current_);
          if (den == 0) {
            abort_parse(current_.span, ParseErrorKind::BadNumber,
                        "zero denominator");
          }
          advance();
          return Expr::constant(chart_, make_rational(num, den));
        }
        return Expr::constant(chart_, Rational(num));
      }
      case Token::Kind::Ident: {
        Expr e = resolve_ident(current_);
        advance();
        return e;
      }
      case Token::Kind::LParen: {
        const SourceSpan open = current_.span;
        advance();
        Expr inner = parse_expr();
        if (current_.kind != Token::Kind::RParen) {
          abort_parse(open, ParseErrorKind::UnmatchedParenthesis,
                      "'(' is never closed");
        }
        advance();
        return inner;
      }
      case Token::Kind::End:
        abort_parse(current_.span, ParseErrorKind::UnexpectedToken,
                    "unexpected end of input");
      default:
        abort_parse(current_.span, ParseErrorKind::UnexpectedToken,
                    "unexpected '" + std::string(current_.text) + "'");
    }
  }

  Expr resolve_ident(const Token& tok) {
    if (auto v = chart_->find(tok.text)) {
      return Expr::variable(chart_, *v);
    }
    std::string name(tok.text);
    const std::size_t quote = name.find('\'');
    if (quote != std::string::npos) {
      const std::string base = name.substr(0, quote);
      if (chart_->find(base)) {
        abort_parse(tok.span, ParseErrorKind::UnknownIdentifier,
                    "'" + base + "' is not a field, so '" + name +
                        "' has no jet variable");
      }
    }
    abort_parse(tok.span, ParseErrorKind::UnknownIdentifier,
                "unknown identifier '" + name + "'");
  }

  std::uint32_t expect_exponent() {
    if (current_.kind != Token::Kind::Number) {
      abort_parse(current_.span, ParseErrorKind::BadNumber,
                  "expected a nonnegative integer exponent after '^'");
    }
    std::uint32_t value = 0;
    auto [ptr, ec] = std::from_chars(current_.text.data(),
                                     current_.text.data() + current_.text.size(),
                                     value);
    if (ec != std::errc() || value > kMaxExponent) {
      abort_parse(current_.span, ParseErrorKind::BadNumber,
                  "exponent too large (limit " + std::to_string(kMaxExponent) +
                      ")");
    }
    advance();
    return value;
  }

  BigInt big_from(const Token& tok) { return BigInt(std::string(tok.text)); }

  void advance() { current_ = lexer_.next(); }

  struct DepthGuard {
    explicit DepthGuard(ExprParser* p) : parser(p) {
      if (++parser->depth_ > kMaxDepth) {
        abort_parse(parser->current_.span, ParseErrorKind::UnexpectedToken,
                    "expression nested too deeply");
      }
    }
    ~DepthGuard() { --parser->depth_; }
    ExprParser* parser;
  };

  Lexer lexer_;
  ChartPtr chart_;
  Token current_;
  int depth_ = 0;
};

}  // namespace detail

/// Parses one expression against a chart. All failures come back as
/// ParseError values; this function never throws for bad input.
inline ParseResult<Expr> parse_expr(std::string_view text, const ChartPtr& chart) {
  try {
    detail::ExprParser parser(text, chart);
    return ParseResult<Expr>::success(parser.parse_all());
  } catch (const detail::ParseAbort& abort) {
    return ParseResult<Expr>::failure(abort.error);
  }
}

/// Canonical textual form: terms leading-monomial first, factors in variable
/// order, coefficients as exact rationals. parse_expr(render_expr(e)) == e.
inline std::string render_expr(const Expr& e) {
  if (e.is_zero()) return "0";
  const ChartPtr& ch = e.chart();
  std::string out;
  bool first = true;
  for (const auto& [m, c] : e.terms()) {
    const bool negative = c < 0;
    if (first) {
      if (negative) out += '-';
      first = false;
    } else {
      out += negative ? " - " : " + ";
    }
    const Rational mag = negative ? Rational(-c) : c;
    if (m.is_constant()) {
      out += to_string(mag);
      continue;
    }
    bool need_star = false;
    if (mag != 1) {
      out += to_string(mag);
      need_star = true;
    }
    for (const auto& [v, exp] : m.factors()) {
      if (need_star) out += '*';
      out += ch->display_name(v);
      if (exp > 1) {
        out += '^';
        out += std::to_string(exp);
      }
      need_star = true;
    }
  }
  return out;
}

/// Numeric integration setup carried by a system file's [integrate] section.
struct IntegrateSettings {
  bool provided = false;             // section present at all
  std::vector<double> init;          // one per field; empty if absent
  std::optional<double> alpha_max;
  std::optional<double> step;
};

/// A parsed system-definition file: chart, Lagrangian, optional flow
/// generators, optional integration defaults.
struct SystemDefinition {
  std::string name;
  ChartPtr chart;
  Expr lagrangian;
  std::optional<LieSystem> generators;
  IntegrateSettings integrate;
};

namespace detail {

struct FileEntry {
  std::string key;
  std::string value;
  SourceSpan key_span;
  SourceSpan value_span;
};

struct FileSection {
  std::string name;
  SourceSpan span;
  std::vector<FileEntry> entries;
};

inline std::pair<std::size_t, std::size_t> trimmed_range(std::string_view text,
                                                         std::size_t begin,
                                                         std::size_t end) {
  while (begin < end && (text[begin] == ' ' || text[begin] == '\t')) ++begin;
  while (end > begin && (text[end - 1] == ' ' || text[end - 1] == '\t' ||
                         text[end - 1] == '\r')) {
    --end;
  }
  return {begin, end};
}

/// Splits the file into sections of key = value entries. '#' starts a
/// comment; blank lines are ignored; every entry must live inside a known
/// section and keys must not repeat within one.
inline std::vector<FileSection> scan_system_file(std::string_view text) {
  static constexpr std::string_view kSections[] = {"system", "lagrangian",
                                                   "generators", "integrate"};
  std::vector<FileSection> sections;
  std::size_t line_start = 0;
  while (line_start <= text.size()) {
    std::size_t line_end = text.find('\n', line_start);
    if (line_end == std::string_view::npos) line_end = text.size();

    std::size_t content_end = line_end;
    const std::size_t hash = text.substr(line_start, line_end - line_start).find('#');
    if (hash != std::string_view::npos) content_end = line_start + hash;

    auto [begin, end] = trimmed_range(text, line_start, content_end);
    if (begin < end) {
      if (text[begin] == '[') {
        if (text[end - 1] != ']') {
          abort_parse({begin, end}, ParseErrorKind::UnexpectedToken,
                      "section header is missing ']'");
        }
        std::string name(text.substr(begin + 1, end - begin - 2));
        bool known = false;
        for (std::string_view s : kSections) known = known || name == s;
        if (!known) {
          abort_parse({begin, end}, ParseErrorKind::UnexpectedToken,
                      "unknown section [" + name + "]");
        }
        for (const FileSection& s : sections) {
          if (s.name == name) {
            abort_parse({begin, end}, ParseErrorKind::UnexpectedToken,
                        "duplicate section [" + name + "]");
          }
        }
        sections.push_back(FileSection{std::move(name), {begin, end}, {}});
      } else {
        const std::size_t eq = text.substr(begin, end - begin).find('=');
        if (eq == std::string_view::npos) {
          abort_parse({begin, end}, ParseErrorKind::UnexpectedToken,
                      "expected 'key = value'");
        }
        if (sections.empty()) {
          abort_parse({begin, end}, ParseErrorKind::UnexpectedToken,
                      "entry appears before any section header");
        }
        auto [kb, ke] = trimmed_range(text, begin, begin + eq);
        auto [vb, ve] = trimmed_range(text, begin + eq + 1, end);
        if (kb == ke) {
          abort_parse({begin, end}, ParseErrorKind::UnexpectedToken,
                      "missing key before '='");
        }
        FileSection& section = sections.back();
        std::string key(text.substr(kb, ke - kb));
        for (const FileEntry& entry : section.entries) {
          if (entry.key == key) {
            abort_parse({kb, ke}, ParseErrorKind::UnexpectedToken,
                        "duplicate key '" + key + "' in [" + section.name + "]");
          }
        }
        section.entries.push_back(FileEntry{std::move(key),
                                            std::string(text.substr(vb, ve - vb)),
                                            {kb, ke},
                                            {vb, ve}});
      }
    }
    if (line_end == text.size()) break;
    line_start = line_end + 1;
  }
  return sections;
}

inline double parse_float(const FileEntry& entry, std::string_view text,
                          SourceSpan span) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    abort_parse(span, ParseErrorKind::BadNumber,
                "invalid number '" + std::string(text) + "' for key '" +
                    entry.key + "'");
  }
  return value;
}

inline std::vector<std::pair<std::string, SourceSpan>> split_list(
    const FileEntry& entry) {
  std::vector<std::pair<std::string, SourceSpan>> items;
  const std::string& v = entry.value;
  std::size_t item_start = 0;
  for (std::size_t i = 0; i <= v.size(); ++i) {
    if (i == v.size() || v[i] == ',') {
      std::size_t b = item_start, e = i;
      while (b < e && (v[b] == ' ' || v[b] == '\t')) ++b;
      while (e > b && (v[e - 1] == ' ' || v[e - 1] == '\t')) --e;
      items.emplace_back(v.substr(b, e - b),
                         SourceSpan{entry.value_span.begin + b,
                                    entry.value_span.begin + e});
      item_start = i + 1;
    }
  }
  return items;
}

}  // namespace detail

/// Parses an INI-style system-definition file:
///
///   [system]       name = <string>   fields = <comma-separated identifiers>
///   [lagrangian]   L = <expression>
///   [generators]   <field> = <expression in fields only>     (optional)
///   [integrate]    init = <floats, one per field>
///                  alpha_max = <float>   step = <float>      (optional)
///
/// A system named "so2" over fields (f, g) gets the traditional momentum
/// aliases p and s.
inline ParseResult<SystemDefinition> parse_system_file(std::string_view text) {
  using detail::abort_parse;
  try {
    if (text.size() >= 3 && text.substr(0, 3) == "\xef\xbb\xbf") {
      text.remove_prefix(3);  // UTF-8 byte-order mark
    }
    {
      auto [b, e] = detail::trimmed_range(text, 0, text.size());
      bool blank = true;
      for (std::size_t i = b; i < e; ++i) {
        blank = blank && (text[i] == ' ' || text[i] == '\t' || text[i] == '\n' ||
                          text[i] == '\r');
      }
      if (blank) {
        abort_parse({0, text.size()}, ParseErrorKind::EmptyInput,
                    "empty system file");
      }
    }

    auto sections = detail::scan_system_file(text);
    const detail::FileSection* system = nullptr;
    const detail::FileSection* lagrangian = nullptr;
    const detail::FileSection* generators = nullptr;
    const detail::FileSection* integrate = nullptr;
    for (const auto& s : sections) {
      if (s.name == "system") system = &s;
      if (s.name == "lagrangian") lagrangian = &s;
      if (s.name == "generators") generators = &s;
      if (s.name == "integrate") integrate = &s;
    }
    if (!system) {
      abort_parse({0, 0}, ParseErrorKind::UnexpectedToken,
                  "missing [system] section");
    }
    if (!lagrangian) {
      abort_parse({0, 0}, ParseErrorKind::UnexpectedToken,
                  "missing [lagrangian] section");
    }

    std::string name;
    std::vector<std::string> fields;
    const detail::FileEntry* fields_entry = nullptr;
    for (const auto& entry : system->entries) {
      if (entry.key == "name") {
        name = entry.value;
      } else if (entry.key == "fields") {
        fields_entry = &entry;
      } else {
        abort_parse(entry.key_span, ParseErrorKind::UnexpectedToken,
                    "unknown key '" + entry.key + "' in [system]");
      }
    }
    if (!fields_entry) {
      abort_parse(system->span, ParseErrorKind::UnexpectedToken,
                  "missing key 'fields' in [system]");
    }
    for (const auto& [item, span] : detail::split_list(*fields_entry)) {
      if (item.empty()) {
        abort_parse(span, ParseErrorKind::UnexpectedToken, "empty field name");
      }
      for (const std::string& seen : fields) {
        if (seen == item) {
          abort_parse(span, ParseErrorKind::UnexpectedToken,
                      "duplicate field '" + item + "'");
        }
      }
      fields.push_back(item);
    }

    std::map<std::string, std::string> aliases;
    if (name == "so2" && fields == std::vector<std::string>{"f", "g"}) {
      aliases = {{"p_f", "p"}, {"p_g", "s"}};
    }
    ChartPtr chart;
    try {
      chart = make_chart(fields, "alpha", aliases);
    } catch (const std::invalid_argument& bad) {
      abort_parse(fields_entry->value_span, ParseErrorKind::UnknownIdentifier,
                  bad.what());
    }

    auto parse_sub_expr = [&](const detail::FileEntry& entry) -> Expr {
      ParseResult<Expr> r = parse_expr(entry.value, chart);
      if (!r.ok()) {
        ParseError err = *r.error;
        err.span.begin += entry.value_span.begin;
        err.span.end += entry.value_span.begin;
        if (err.span.end == err.span.begin && entry.value.empty()) {
          err.span = entry.value_span;
        }
        throw detail::ParseAbort{err};
      }
      return *r;
    };

    std::optional<Expr> L;
    for (const auto& entry : lagrangian->entries) {
      if (entry.key != "L") {
        abort_parse(entry.key_span, ParseErrorKind::UnexpectedToken,
                    "unknown key '" + entry.key + "' in [lagrangian]");
      }
      L = parse_sub_expr(entry);
    }
    if (!L) {
      abort_parse(lagrangian->span, ParseErrorKind::UnexpectedToken,
                  "missing key 'L' in [lagrangian]");
    }

    std::optional<LieSystem> lie;
    if (generators) {
      std::vector<std::optional<Expr>> xi(chart->field_count());
      for (const auto& entry : generators->entries) {
        auto v = chart->find(entry.key);
        if (!v || chart->kind(*v) != VarKind::Field) {
          abort_parse(entry.key_span, ParseErrorKind::UnknownIdentifier,
                      "generator for unknown field '" + entry.key + "'");
        }
        Expr value = parse_sub_expr(entry);
        for (VarId used : value.variables()) {
          if (chart->kind(used) != VarKind::Field) {
            abort_parse(entry.value_span, ParseErrorKind::UnexpectedToken,
                        "generator for '" + entry.key +
                            "' must use field variables only, found '" +
                            chart->display_name(used) + "'");
          }
        }
        xi[chart->position(*v)] = std::move(value);
      }
      std::vector<Expr> complete;
      for (std::size_t i = 0; i < chart->field_count(); ++i) {
        if (!xi[i]) {
          abort_parse(generators->span, ParseErrorKind::UnexpectedToken,
                      "missing generator for field '" +
                          chart->name(chart->field(i)) + "'");
        }
        complete.push_back(std::move(*xi[i]));
      }
      lie.emplace(chart, std::move(complete));
    }

    IntegrateSettings settings;
    if (integrate) {
      settings.provided = true;
      for (const auto& entry : integrate->entries) {
        if (entry.key == "init") {
          for (const auto& [item, span] : detail::split_list(entry)) {
            settings.init.push_back(detail::parse_float(entry, item, span));
          }
          if (settings.init.size() != chart->field_count()) {
            abort_parse(entry.value_span, ParseErrorKind::BadNumber,
                        "init needs exactly " +
                            std::to_string(chart->field_count()) +
                            " values (one per field)");
          }
        } else if (entry.key == "alpha_max") {
          const double v = detail::parse_float(entry, entry.value, entry.value_span);
          if (!(v >= 0.0)) {
            abort_parse(entry.value_span, ParseErrorKind::BadNumber,
                        "alpha_max must be nonnegative");
          }
          settings.alpha_max = v;
        } else if (entry.key == "step") {
          const double v = detail::parse_float(entry, entry.value, entry.value_span);
          if (!(v > 0.0)) {
            abort_parse(entry.value_span, ParseErrorKind::BadNumber,
                        "step must be positive");
          }
          settings.step = v;
        } else {
          abort_parse(entry.key_span, ParseErrorKind::UnexpectedToken,
                      "unknown key '" + entry.key + "' in [integrate]");
        }
      }
    }

    return ParseResult<SystemDefinition>::success(SystemDefinition{
        std::move(name), std::move(chart), std::move(*L), std::move(lie),
        std::move(settings)});
  } catch (const detail::ParseAbort& abort) {
    return ParseResult<SystemDefinition>::failure(abort.error);
  }
}

}  // namespace hamdirac
