#pragma once

#include <memory>
#include <string>
#include <string_view>

namespace mfdstag::expr {

enum class Var { X, Y };

enum class Func { Sin, Cos, Exp, Log, Sqrt, Abs };

enum class BinOp { Add, Sub, Mul, Div };

struct Node;

// Immutable expression tree over the two coordinates x and y. Copies share
// structure, so an Expr is cheap to pass by value and safe to evaluate from
// several threads at once.
class Expr {
 public:
  Expr();  // the constant 0

  static Expr constant(double value);
  static Expr variable(Var v);
  static Expr pi();
  static Expr negate(Expr operand);
  static Expr binary(BinOp op, Expr lhs, Expr rhs);
  // `exponent` must not depend on x or y.
  static Expr power(Expr base, double exponent);
  static Expr call(Func f, Expr arg);

  // Throws DomainError on division by zero, log/sqrt outside their domain,
  // a non-integer power of a non-positive base, or any non-finite result.
  double eval(double x, double y) const;

  // Fully parenthesized text that parse() maps back to an equivalent tree.
  std::string print() const;

  bool depends_on_coordinates() const;
  bool is_constant(double value) const;

  const Node& node() const { return *node_; }
  const std::shared_ptr<const Node>& ptr() const { return node_; }

  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<const Node> node_;
};

struct Node {
  enum class Kind { Constant, Pi, Variable, Negate, Binary, Power, Call };

  Kind kind = Kind::Constant;
  double value = 0.0;  // Constant payload, Power exponent
  Var var = Var::X;
  BinOp op = BinOp::Add;
  Func func = Func::Sin;
  std::shared_ptr<const Node> lhs;  // Negate/Power/Call operand, Binary left
  std::shared_ptr<const Node> rhs;  // Binary right
};

// Grammar (loosest to tightest):
//   sum     := product (('+' | '-') product)*
//   product := unary (('*' | '/') unary)*
//   unary   := ('-' | '+') unary | power
//   power   := primary ('^' unary)?          right associative
//   primary := number | 'x' | 'y' | 'pi' | func '(' sum ')' | '(' sum ')'
// Throws ParseError (with byte offset) on malformed input, unknown
// identifiers, wrong argument counts, or an exponent that depends on x/y.
Expr parse(std::string_view source);

// Exact partial derivative. The result is not simplified beyond dropping
// trivial zero/one factors. Throws DomainError when `abs` is differentiated.
Expr differentiate(const Expr& e, Var v);

// Sum helpers that keep derivative trees small.
Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);

}  // namespace mfdstag::expr
