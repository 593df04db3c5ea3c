#include "mfdstag/expr.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <vector>

#include "mfdstag/error.hpp"

namespace mfdstag::expr {

namespace {

using NodePtr = std::shared_ptr<const Node>;

Expr make(Node n) { return Expr(std::make_shared<const Node>(std::move(n))); }

const char* func_name(Func f) {
  switch (f) {
    case Func::Sin: return "sin";
    case Func::Cos: return "cos";
    case Func::Exp: return "exp";
    case Func::Log: return "log";
    case Func::Sqrt: return "sqrt";
    case Func::Abs: return "abs";
  }
  return "?";
}

bool is_integer(double v) {
  return std::isfinite(v) && std::floor(v) == v && std::fabs(v) < 9.0e15;
}

double checked(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw DomainError(std::string("non-finite result in ") + what);
  }
  return v;
}

double eval_node(const Node& n, double x, double y) {
  switch (n.kind) {
    case Node::Kind::Constant: return n.value;
    case Node::Kind::Pi: return std::numbers::pi;
    case Node::Kind::Variable: return n.var == Var::X ? x : y;
    case Node::Kind::Negate: return -eval_node(*n.lhs, x, y);
    case Node::Kind::Binary: {
      const double a = eval_node(*n.lhs, x, y);
      const double b = eval_node(*n.rhs, x, y);
      switch (n.op) {
        case BinOp::Add: return checked(a + b, "addition");
        case BinOp::Sub: return checked(a - b, "subtraction");
        case BinOp::Mul: return checked(a * b, "multiplication");
        case BinOp::Div:
          if (b == 0.0) throw DomainError("division by zero");
          return checked(a / b, "division");
      }
      break;
    }
    case Node::Kind::Power: {
      const double b = eval_node(*n.lhs, x, y);
      if (!is_integer(n.value) && !(b > 0.0)) {
        throw DomainError("non-integer power of a non-positive base");
      }
      return checked(std::pow(b, n.value), "power");
    }
    case Node::Kind::Call: {
      const double a = eval_node(*n.lhs, x, y);
      switch (n.func) {
        case Func::Sin: return std::sin(a);
        case Func::Cos: return std::cos(a);
        case Func::Exp: return checked(std::exp(a), "exp");
        case Func::Log:
          if (!(a > 0.0)) throw DomainError("log of a non-positive value");
          return std::log(a);
        case Func::Sqrt:
          if (a < 0.0) throw DomainError("sqrt of a negative value");
          return std::sqrt(a);
        case Func::Abs: return std::fabs(a);
      }
      break;
    }
  }
  throw DomainError("corrupt expression node");
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s(buf);
  if (v < 0.0) return "(" + s + ")";
  return s;
}

void print_node(const Node& n, std::string& out) {
  switch (n.kind) {
    case Node::Kind::Constant: out += format_number(n.value); return;
    case Node::Kind::Pi: out += "pi"; return;
    case Node::Kind::Variable: out += n.var == Var::X ? "x" : "y"; return;
    case Node::Kind::Negate:
      out += "(-";
      print_node(*n.lhs, out);
      out += ")";
      return;
    case Node::Kind::Binary: {
      static constexpr char ops[] = {'+', '-', '*', '/'};
      out += "(";
      print_node(*n.lhs, out);
      out += ' ';
      out += ops[static_cast<int>(n.op)];
      out += ' ';
      print_node(*n.rhs, out);
      out += ")";
      return;
    }
    case Node::Kind::Power:
      out += "(";
      print_node(*n.lhs, out);
      out += ")^";
      out += format_number(n.value);
      return;
    case Node::Kind::Call:
      out += func_name(n.func);
      out += "(";
      print_node(*n.lhs, out);
      out += ")";
      return;
  }
}

bool depends(const Node& n) {
  switch (n.kind) {
    case Node::Kind::Constant:
    case Node::Kind::Pi: return false;
    case Node::Kind::Variable: return true;
    case Node::Kind::Binary: return depends(*n.lhs) || depends(*n.rhs);
    default: return depends(*n.lhs);
  }
}

// --- parser -----------------------------------------------------------------

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  Expr run() {
    Expr e = sum();
    skip_ws();
    if (pos_ != src_.size()) fail("unexpected character");
    return e;
  }

 private:
  static constexpr int kMaxDepth = 200;

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(pos_, msg); }
  [[noreturn]] void fail_at(std::size_t at, const std::string& msg) const {
    throw ParseError(at, msg);
  }

  void skip_ws() {
    while (pos_ < src_.size() &&
           (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' ||
            src_[pos_] == '\r')) {
      ++pos_;
    }
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  struct DepthGuard {
    explicit DepthGuard(Parser& p) : p_(p) {
      if (++p_.depth_ > kMaxDepth) p_.fail("expression nested too deeply");
    }
    ~DepthGuard() { --p_.depth_; }
    Parser& p_;
  };

  Expr sum() {
    DepthGuard guard(*this);
    Expr e = product();
    for (;;) {
      if (accept('+')) {
        e = Expr::binary(BinOp::Add, e, product());
      } else if (accept('-')) {
        e = Expr::binary(BinOp::Sub, e, product());
      } else {
        return e;
      }
    }
  }

  Expr product() {
    Expr e = unary();
    for (;;) {
      if (accept('*')) {
        e = Expr::binary(BinOp::Mul, e, unary());
      } else if (accept('/')) {
        e = Expr::binary(BinOp::Div, e, unary());
      } else {
        return e;
      }
    }
  }

  Expr unary() {
    DepthGuard guard(*this);
    if (accept('-')) return Expr::negate(unary());
    if (accept('+')) return unary();
    return power();
  }

  Expr power() {
    Expr base = primary();
    skip_ws();
    const std::size_t at = pos_;
    if (!accept('^')) return base;
    Expr exponent = unary();
    if (exponent.depends_on_coordinates()) {
      fail_at(at, "exponent must be a constant");
    }
    double value = 0.0;
    try {
      value = exponent.eval(0.0, 0.0);
    } catch (const DomainError&) {
      fail_at(at, "exponent is not a finite constant");
    }
    return Expr::power(base, value);
  }

  Expr primary() {
    skip_ws();
    if (pos_ >= src_.size()) fail("unexpected end of input");
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = sum();
      expect(')');
      return e;
    }
    if ((c >= '0' && c <= '9') || c == '.') return number();
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_') {
      return identifier();
    }
    fail("unexpected character");
  }

  Expr number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      std::size_t n = 0;
      while (pos_ < src_.size() && src_[pos_] >= '0' && src_[pos_] <= '9') {
        ++pos_;
        ++n;
      }
      return n;
    };
    std::size_t nd = digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      nd += digits();
    }
    if (nd == 0) fail_at(start, "malformed number");
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (digits() == 0) fail_at(start, "malformed exponent in number");
    }
    double v = 0.0;
    const char* first = src_.data() + start;
    const char* last = src_.data() + pos_;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
      fail_at(start, "number out of range");
    }
    return Expr::constant(v);
  }

  Expr identifier() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           ((src_[pos_] >= 'a' && src_[pos_] <= 'z') ||
            (src_[pos_] >= 'A' && src_[pos_] <= 'Z') ||
            (src_[pos_] >= '0' && src_[pos_] <= '9') || src_[pos_] == '_')) {
      ++pos_;
    }
    const std::string_view name = src_.substr(start, pos_ - start);
    if (name == "x") return Expr::variable(Var::X);
    if (name == "y") return Expr::variable(Var::Y);
    if (name == "pi") return Expr::pi();

    static constexpr std::pair<std::string_view, Func> funcs[] = {
        {"sin", Func::Sin},   {"cos", Func::Cos},   {"exp", Func::Exp},
        {"log", Func::Log},   {"sqrt", Func::Sqrt}, {"abs", Func::Abs}};
    for (const auto& [fname, f] : funcs) {
      if (name != fname) continue;
      skip_ws();
      if (!accept('(')) fail("expected '(' after function name");
      std::vector<Expr> args;
      if (!accept(')')) {
        do {
          args.push_back(sum());
        } while (accept(','));
        expect(')');
      }
      if (args.size() != 1) {
        fail_at(start, "function '" + std::string(name) + "' takes 1 argument, got " +
                           std::to_string(args.size()));
      }
      return Expr::call(f, args.front());
    }
    fail_at(start, "unknown identifier '" + std::string(name) + "'");
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int depth_ = 0;
};

}  // namespace

// --- Expr -------------------------------------------------------------------

Expr::Expr() {
  static const NodePtr zero = std::make_shared<const Node>();
  node_ = zero;
}

Expr Expr::constant(double value) {
  Node n;
  n.kind = Node::Kind::Constant;
  n.value = value;
  return make(std::move(n));
}

Expr Expr::variable(Var v) {
  Node n;
  n.kind = Node::Kind::Variable;
  n.var = v;
  return make(std::move(n));
}

Expr Expr::pi() {
  Node n;
  n.kind = Node::Kind::Pi;
  return make(std::move(n));
}

Expr Expr::negate(Expr operand) {
  Node n;
  n.kind = Node::Kind::Negate;
  n.lhs = operand.ptr();
  return make(std::move(n));
}

Expr Expr::binary(BinOp op, Expr lhs, Expr rhs) {
  Node n;
  n.kind = Node::Kind::Binary;
  n.op = op;
  n.lhs = lhs.ptr();
  n.rhs = rhs.ptr();
  return make(std::move(n));
}

Expr Expr::power(Expr base, double exponent) {
  Node n;
  n.kind = Node::Kind::Power;
  n.value = exponent;
  n.lhs = base.ptr();
  return make(std::move(n));
}

Expr Expr::call(Func f, Expr arg) {
  Node n;
  n.kind = Node::Kind::Call;
  n.func = f;
  n.lhs = arg.ptr();
  return make(std::move(n));
}

double Expr::eval(double x, double y) const {
  return checked(eval_node(*node_, x, y), "expression");
}

std::string Expr::print() const {
  std::string out;
  print_node(*node_, out);
  return out;
}

bool Expr::depends_on_coordinates() const { return depends(*node_); }

bool Expr::is_constant(double value) const {
  return node_->kind == Node::Kind::Constant && node_->value == value;
}

Expr parse(std::string_view source) { return Parser(source).run(); }

// --- arithmetic helpers ------------------------------------------------------

namespace {
bool is_const(const Expr& e) { return e.node().kind == Node::Kind::Constant; }
}  // namespace

Expr operator+(const Expr& a, const Expr& b) {
  if (a.is_constant(0.0)) return b;
  if (b.is_constant(0.0)) return a;
  if (is_const(a) && is_const(b)) return Expr::constant(a.node().value + b.node().value);
  return Expr::binary(BinOp::Add, a, b);
}

Expr operator-(const Expr& a, const Expr& b) {
  if (b.is_constant(0.0)) return a;
  if (a.is_constant(0.0)) return -b;
  if (is_const(a) && is_const(b)) return Expr::constant(a.node().value - b.node().value);
  return Expr::binary(BinOp::Sub, a, b);
}

Expr operator*(const Expr& a, const Expr& b) {
  if (a.is_constant(0.0) || b.is_constant(0.0)) return Expr::constant(0.0);
  if (a.is_constant(1.0)) return b;
  if (b.is_constant(1.0)) return a;
  if (is_const(a) && is_const(b)) return Expr::constant(a.node().value * b.node().value);
  return Expr::binary(BinOp::Mul, a, b);
}

Expr operator/(const Expr& a, const Expr& b) {
  if (a.is_constant(0.0)) return Expr::constant(0.0);
  if (b.is_constant(1.0)) return a;
  return Expr::binary(BinOp::Div, a, b);
}

Expr operator-(const Expr& a) {
  if (is_const(a)) return Expr::constant(-a.node().value);
  if (a.node().kind == Node::Kind::Negate) return Expr(a.node().lhs);
  return Expr::negate(a);
}

Expr differentiate(const Expr& e, Var v) {
  const Node& n = e.node();
  switch (n.kind) {
    case Node::Kind::Constant:
    case Node::Kind::Pi: return Expr::constant(0.0);
    case Node::Kind::Variable: return Expr::constant(n.var == v ? 1.0 : 0.0);
    case Node::Kind::Negate: return -differentiate(Expr(n.lhs), v);
    case Node::Kind::Binary: {
      const Expr a(n.lhs);
      const Expr b(n.rhs);
      const Expr da = differentiate(a, v);
      const Expr db = differentiate(b, v);
      switch (n.op) {
        case BinOp::Add: return da + db;
        case BinOp::Sub: return da - db;
        case BinOp::Mul: return da * b + a * db;
        case BinOp::Div:
          if (db.is_constant(0.0)) return da / b;
          return (da * b - a * db) / Expr::power(b, 2.0);
      }
      break;
    }
    case Node::Kind::Power: {
      const Expr u(n.lhs);
      const Expr du = differentiate(u, v);
      if (n.value == 0.0 || du.is_constant(0.0)) return Expr::constant(0.0);
      if (n.value == 1.0) return du;
      const Expr outer = n.value == 2.0 ? u : Expr::power(u, n.value - 1.0);
      return Expr::constant(n.value) * outer * du;
    }
    case Node::Kind::Call: {
      const Expr u(n.lhs);
      if (n.func == Func::Abs) {
        throw DomainError("abs is not differentiable; rewrite the expression without abs");
      }
      const Expr du = differentiate(u, v);
      if (du.is_constant(0.0)) return Expr::constant(0.0);
      switch (n.func) {
        case Func::Sin: return Expr::call(Func::Cos, u) * du;
        case Func::Cos: return -(Expr::call(Func::Sin, u) * du);
        case Func::Exp: return e * du;
        case Func::Log: return du / u;
        case Func::Sqrt: return du / (Expr::constant(2.0) * e);
        case Func::Abs: break;
      }
      break;
    }
  }
  throw DomainError("corrupt expression node");
}

}  // namespace mfdstag::expr
