#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <optional>

#include "webaudit/expr.hpp"

namespace webaudit::expr {

ParseError::ParseError(ParseDiagnostic diag)
    : std::runtime_error("parse error at offset " + std::to_string(diag.offset) + ": " + diag.message),
      diag_(std::move(diag)) {}

namespace {

bool ident_start(unsigned char c) { return std::isalpha(c) || c == '_' || c >= 0x80; }
bool ident_char(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

class Parser {
 public:
  Parser(std::string_view text, std::optional<std::span<const std::string>> vars) : text_(text), vars_(vars) {}

  Expression run() {
    skip_ws();
    if (at_end()) fail(pos_, "empty expression", "expression");
    Expression e = sum();
    skip_ws();
    if (!at_end()) fail(pos_, std::string("unexpected character '") + text_[pos_] + "'", "operator or end of input");
    return e;
  }

 private:
  [[noreturn]] void fail(std::size_t at, std::string message, std::string expected) const {
    throw ParseError(ParseDiagnostic{std::min(at, text_.size()), std::move(message), std::move(expected)});
  }

  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return at_end() ? '\0' : text_[pos_]; }

  void skip_ws() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (peek() == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expression sum() {
    Expression lhs = product();
    for (;;) {
      skip_ws();
      if (accept('+')) {
        lhs = lhs + product();
      } else if (accept('-')) {
        lhs = lhs - product();
      } else {
        return lhs;
      }
    }
  }

  Expression product() {
    Expression lhs = unary();
    for (;;) {
      if (accept('*')) {
        lhs = lhs * unary();
      } else if (accept('/')) {
        lhs = lhs / unary();
      } else {
        return lhs;
      }
    }
  }

  Expression unary() {
    skip_ws();
    if (at_end()) fail(pos_, "unexpected end of input", "expression");
    if (accept('+')) return unary();
    if (accept('-')) {
      skip_ws();
      if (is_digit(peek()) || peek() == '.') {
        std::size_t save = pos_;
        double v = number();
        skip_ws();
        if (peek() != '^') return Expression::constant(-v);
        pos_ = save;
      }
      return -unary();
    }
    return power();
  }

  Expression power() {
    Expression base = primary();
    if (accept('^')) return pow(base, unary());
    return base;
  }

  double number() {
    std::size_t start = pos_;
    while (is_digit(peek())) ++pos_;
    if (peek() == '.') {
      ++pos_;
      while (is_digit(peek())) ++pos_;
    }
    if (peek() == 'e' || peek() == 'E') {
      std::size_t mark = pos_;
      ++pos_;
      if (peek() == '+' || peek() == '-') ++pos_;
      if (is_digit(peek())) {
        while (is_digit(peek())) ++pos_;
      } else {
        pos_ = mark;  // "2e" followed by something else: the 'e' is not ours
      }
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, v);
    if (ec != std::errc() || ptr != text_.data() + pos_ || pos_ == start) fail(start, "malformed number", "number");
    return v;
  }

  Expression primary() {
    skip_ws();
    if (at_end()) fail(pos_, "unexpected end of input", "expression");
    char c = peek();
    if (is_digit(c) || c == '.') return Expression::constant(number());
    if (c == '(') {
      ++pos_;
      Expression inner = sum();
      if (!accept(')')) fail(pos_, at_end() ? "unexpected end of input" : "expected ')'", "')'");
      return inner;
    }
    if (ident_start(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      while (!at_end() && ident_char(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      std::string name(text_.substr(start, pos_ - start));
      static constexpr std::array<std::pair<std::string_view, Op>, 3> funcs{
          {{"exp", Op::Exp}, {"ln", Op::Ln}, {"sqrt", Op::Sqrt}}};
      for (const auto& [fname, op] : funcs) {
        if (name == fname) {
          if (!accept('(')) fail(pos_, "expected '(' after function name '" + name + "'", "'('");
          Expression inner = sum();
          if (!accept(')')) fail(pos_, at_end() ? "unexpected end of input" : "expected ')'", "')'");
          return Expression::unary(op, inner);
        }
      }
      if (vars_ && std::find(vars_->begin(), vars_->end(), name) == vars_->end()) {
        std::string expected = "one of {exp, ln, sqrt";
        for (const auto& v : *vars_) expected += ", " + v;
        expected += "}";
        fail(start, "unknown identifier '" + name + "'", expected);
      }
      return Expression::variable(std::move(name));
    }
    fail(pos_, std::string("unexpected character '") + c + "'", "number, identifier or '('");
  }

  std::string_view text_;
  std::optional<std::span<const std::string>> vars_;
  std::size_t pos_ = 0;
};

// Binding strength used by the printer; atoms are 5.
int precedence(const Expression& e) {
  switch (e.op()) {
    case Op::Add:
    case Op::Sub:
      return 1;
    case Op::Mul:
    case Op::Div:
      return 2;
    case Op::Neg:
      return 3;
    case Op::Pow:
      return 4;
    default:
      return 5;
  }
}

void print(const Expression& e, std::string& out);

void print_wrapped(const Expression& e, bool parens, std::string& out) {
  if (parens) out += '(';
  print(e, out);
  if (parens) out += ')';
}

void print(const Expression& e, std::string& out) {
  switch (e.op()) {
    case Op::Const: {
      std::array<char, 64> buf{};
      auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), e.value());
      std::string_view digits(buf.data(), static_cast<std::size_t>(ptr - buf.data()));
      if (e.value() < 0) {
        out += '(';
        out += digits;
        out += ')';
      } else {
        out += digits;
      }
      return;
    }
    case Op::Var:
      out += e.name();
      return;
    case Op::Exp:
    case Op::Ln:
    case Op::Sqrt:
      out += e.op() == Op::Exp ? "exp(" : e.op() == Op::Ln ? "ln(" : "sqrt(";
      print(e.arg(), out);
      out += ')';
      return;
    case Op::Neg: {
      out += '-';
      const Expression& a = e.arg();
      // "-3" would read back as a negative literal
      bool parens = precedence(a) < 3 || (a.is_constant() && a.value() >= 0);
      print_wrapped(a, parens, out);
      return;
    }
    case Op::Pow:
      print_wrapped(e.lhs(), precedence(e.lhs()) < 5, out);
      out += '^';
      print_wrapped(e.rhs(), precedence(e.rhs()) < 3, out);
      return;
    default: {
      int p = precedence(e);
      print_wrapped(e.lhs(), precedence(e.lhs()) < p, out);
      out += e.op() == Op::Add ? " + " : e.op() == Op::Sub ? " - " : e.op() == Op::Mul ? "*" : "/";
      print_wrapped(e.rhs(), precedence(e.rhs()) <= p, out);
    }
  }
}

}  // namespace

Expression parse(std::string_view text) { return Parser(text, std::nullopt).run(); }

Expression parse(std::string_view text, std::span<const std::string> variables) {
  return Parser(text, variables).run();
}

std::string to_string(const Expression& e) {
  std::string out;
  print(e, out);
  return out;
}

}  // namespace webaudit::expr
