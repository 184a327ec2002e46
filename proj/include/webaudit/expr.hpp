#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace webaudit::expr {

enum class Op : std::uint8_t { Const, Var, Neg, Exp, Ln, Sqrt, Add, Sub, Mul, Div, Pow };

bool is_unary(Op op);
bool is_binary(Op op);

/// Immutable closed-form expression tree over named real variables.
///
/// Nodes are shared between trees; copying an Expression is a pointer copy.
/// The raw constructors below build exactly the node asked for. Folding and
/// identity rules live in simplify() and in the derivative builder.
class Expression {
 public:
  Expression();  // constant 0

  static Expression constant(double value);
  static Expression variable(std::string name);
  static Expression unary(Op op, Expression arg);
  static Expression binary(Op op, Expression lhs, Expression rhs);

  Op op() const;
  double value() const;             // Const only
  const std::string& name() const;  // Var only
  const Expression& arg() const;    // unary ops, also lhs of binary
  const Expression& lhs() const;
  const Expression& rhs() const;

  bool is_constant() const { return op() == Op::Const; }
  bool is_constant(double v) const { return is_constant() && value() == v; }

  // Identity of the underlying node, used for caching.
  const void* id() const { return node_.get(); }

 private:
  struct Node;
  explicit Expression(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

/// Structural equality (constants compared by value).
bool operator==(const Expression& a, const Expression& b);

Expression operator+(const Expression& a, const Expression& b);
Expression operator-(const Expression& a, const Expression& b);
Expression operator*(const Expression& a, const Expression& b);
Expression operator/(const Expression& a, const Expression& b);
Expression operator-(const Expression& a);
Expression pow(const Expression& base, const Expression& exponent);
Expression exp(const Expression& a);
Expression ln(const Expression& a);
Expression sqrt(const Expression& a);

// ---------------------------------------------------------------- parsing

struct ParseDiagnostic {
  std::size_t offset = 0;  // byte offset into the input, <= input size
  std::string message;
  std::string expected;
};

class ParseError : public std::runtime_error {
 public:
  explicit ParseError(ParseDiagnostic diag);
  const ParseDiagnostic& diagnostic() const { return diag_; }

 private:
  ParseDiagnostic diag_;
};

/// Parse infix text. Grammar, loosest to tightest binding:
///   sum     := product (('+'|'-') product)*
///   product := unary (('*'|'/') unary)*
///   unary   := '-' unary | '+' unary | power
///   power   := primary ('^' unary)?          (right associative)
///   primary := number | name | func '(' sum ')' | '(' sum ')'
/// with func in {exp, ln, sqrt}. A '-' written directly before a numeric
/// literal that is not raised to a power yields a negative constant.
/// This overload accepts any identifier as a free variable.
Expression parse(std::string_view text);

/// As above, but identifiers other than `variables` are rejected.
Expression parse(std::string_view text, std::span<const std::string> variables);

/// Text form that parse() maps back to a structurally equal tree.
std::string to_string(const Expression& e);

// ------------------------------------------------------------- evaluation

class EvalError : public std::runtime_error {
 public:
  enum class Kind { UnboundVariable, Domain, NonFinite };
  EvalError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

using Bindings = std::map<std::string, double, std::less<>>;

double evaluate(const Expression& e, const Bindings& bindings);

/// Expression compiled to straight-line code over a fixed slot layout.
/// Shared subtrees are computed once, so derivative DAGs stay cheap.
class Program {
 public:
  Program() = default;
  Program(const Expression& e, std::vector<std::string> slots);

  double operator()(std::span<const double> values) const;
  const std::vector<std::string>& slots() const { return slots_; }
  std::size_t size() const { return code_.size(); }

 private:
  struct Instr {
    Op op;
    std::uint32_t a;  // slot for Var, operand registers otherwise
    std::uint32_t b;
    double value;
  };
  std::vector<Instr> code_;
  std::vector<std::string> slots_;
};

// ------------------------------------------------------------ calculus

Expression differentiate(const Expression& e, std::string_view var);

/// Constant folding, 0/1 identities and double negation. The result agrees
/// with `e` wherever `e` evaluates; no cancellation such as x/x -> 1.
Expression simplify(const Expression& e);

Expression substitute(const Expression& e, const std::map<std::string, Expression, std::less<>>& replacements);

std::set<std::string> free_variables(const Expression& e);
bool depends_on(const Expression& e, std::string_view var);
std::size_t node_count(const Expression& e);

// Folding constructors used by differentiate() and simplify().
namespace fold {
Expression add(const Expression& a, const Expression& b);
Expression sub(const Expression& a, const Expression& b);
Expression mul(const Expression& a, const Expression& b);
Expression div(const Expression& a, const Expression& b);
Expression pow(const Expression& a, const Expression& b);
Expression neg(const Expression& a);
Expression unary(Op op, const Expression& a);
}  // namespace fold

}  // namespace webaudit::expr
