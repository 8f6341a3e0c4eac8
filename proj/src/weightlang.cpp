#include "l2ext/weightlang.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace l2ext {

namespace {

constexpr int kMaxRecursion = 256;

std::string fmt_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Expression text for a complex constant, e.g. "(2-0.5*i)".
std::string complex_literal(cplx c) {
  const std::string re = c.real() < 0 ? "(-" + fmt_real(-c.real()) + ")" : fmt_real(c.real());
  if (c.imag() == 0.0) return re;
  const std::string sign = c.imag() < 0 ? " - " : " + ";
  return "(" + re + sign + fmt_real(std::abs(c.imag())) + "*i)";
}

std::string_view var_name(Var v) {
  switch (v) {
    case Var::Z: return "z";
    case Var::Z1: return "z1";
    case Var::Z2: return "z2";
    case Var::Tau: return "tau";
  }
  return "?";
}

std::string_view func_name(Func f) {
  switch (f) {
    case Func::Re: return "re";
    case Func::Im: return "im";
    case Func::Abs2: return "abs2";
    case Func::Exp: return "exp";
    case Func::Log: return "log";
    case Func::Conj: return "conj";
  }
  return "?";
}

int ast_depth(const ExprNode& n) {
  int d = 0;
  if (n.lhs) d = std::max(d, ast_depth(*n.lhs));
  if (n.rhs) d = std::max(d, ast_depth(*n.rhs));
  return d + 1;
}

ExprPtr make(ExprNode node) { return std::make_shared<const ExprNode>(std::move(node)); }

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  ExprPtr parse() {
    ExprPtr e = parse_expr();
    skip_ws();
    if (pos_ != src_.size()) {
      throw Error::syntax(pos_, std::string("unexpected '") + src_[pos_] + "'");
    }
    return e;
  }

  std::vector<Var> vars() const {
    std::vector<Var> out;
    for (Var v : {Var::Z, Var::Z1, Var::Z2, Var::Tau}) {
      if (seen_[static_cast<int>(v)]) out.push_back(v);
    }
    return out;
  }

 private:
  void skip_ws() {
    while (pos_ < src_.size() &&
           (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' || src_[pos_] == '\r')) {
      ++pos_;
    }
  }

  bool peek(char c) {
    skip_ws();
    return pos_ < src_.size() && src_[pos_] == c;
  }

  void expect(char c) {
    if (!peek(c)) throw Error::syntax(pos_, std::string("expected '") + c + "'");
    ++pos_;
  }

  ExprPtr parse_expr() {
    ExprPtr lhs = parse_term();
    while (true) {
      BinOp op;
      if (peek('+')) {
        op = BinOp::Add;
      } else if (peek('-')) {
        op = BinOp::Sub;
      } else {
        return lhs;
      }
      ++pos_;
      ExprPtr rhs = parse_term();
      lhs = make({.kind = ExprNode::Kind::Binary, .op = op, .lhs = lhs, .rhs = rhs});
    }
  }

  ExprPtr parse_term() {
    ExprPtr lhs = parse_factor();
    while (true) {
      BinOp op;
      if (peek('*')) {
        op = BinOp::Mul;
      } else if (peek('/')) {
        op = BinOp::Div;
      } else {
        return lhs;
      }
      ++pos_;
      ExprPtr rhs = parse_factor();
      lhs = make({.kind = ExprNode::Kind::Binary, .op = op, .lhs = lhs, .rhs = rhs});
    }
  }

  ExprPtr parse_factor() {
    if (++recursion_ > kMaxRecursion) {
      throw Error(ErrorKind::DepthLimit, "expression nesting exceeds limit at offset " +
                                             std::to_string(pos_));
    }
    ExprPtr out;
    if (peek('-')) {
      ++pos_;
      out = make({.kind = ExprNode::Kind::Negate, .lhs = parse_factor()});
    } else {
      out = parse_base();
      if (peek('^')) {
        ++pos_;
        const int n = parse_int();
        out = make({.kind = ExprNode::Kind::Power, .exponent = n, .lhs = out});
      }
    }
    --recursion_;
    return out;
  }

  int parse_int() {
    skip_ws();
    const std::size_t start = pos_;
    bool neg = false;
    if (pos_ < src_.size() && (src_[pos_] == '-' || src_[pos_] == '+')) {
      neg = src_[pos_] == '-';
      ++pos_;
    }
    const std::size_t digits = pos_;
    long value = 0;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
      value = value * 10 + (src_[pos_] - '0');
      if (value > 1024) throw Error::syntax(start, "exponent magnitude above 1024");
      ++pos_;
    }
    if (pos_ == digits) throw Error::syntax(start, "expected integer exponent");
    return static_cast<int>(neg ? -value : value);
  }

  ExprPtr parse_number() {
    const std::size_t start = pos_;
    std::size_t p = pos_;
    auto digits = [&] {
      const std::size_t s = p;
      while (p < src_.size() && std::isdigit(static_cast<unsigned char>(src_[p]))) ++p;
      return p - s;
    };
    std::size_t n = digits();
    if (p < src_.size() && src_[p] == '.') {
      ++p;
      n += digits();
    }
    if (n == 0) throw Error::syntax(start, "malformed number");
    if (p < src_.size() && (src_[p] == 'e' || src_[p] == 'E')) {
      std::size_t q = p + 1;
      if (q < src_.size() && (src_[q] == '+' || src_[q] == '-')) ++q;
      const std::size_t exp_start = q;
      while (q < src_.size() && std::isdigit(static_cast<unsigned char>(src_[q]))) ++q;
      if (q == exp_start) throw Error::syntax(p, "malformed exponent");
      p = q;
    }
    const std::string text(src_.substr(start, p - start));
    pos_ = p;
    return make({.kind = ExprNode::Kind::Number, .number = std::strtod(text.c_str(), nullptr)});
  }

  ExprPtr parse_base() {
    skip_ws();
    if (pos_ >= src_.size()) throw Error::syntax(pos_, "unexpected end of input");
    const char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (c == '(') {
      ++pos_;
      ExprPtr inner = parse_expr();
      expect(')');
      return inner;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
        ++pos_;
      }
      const std::string_view id = src_.substr(start, pos_ - start);
      if (id == "i") return make({.kind = ExprNode::Kind::ImagUnit});
      for (Var v : {Var::Z, Var::Z1, Var::Z2, Var::Tau}) {
        if (id == var_name(v)) {
          seen_[static_cast<int>(v)] = true;
          return make({.kind = ExprNode::Kind::Variable, .var = v});
        }
      }
      for (Func f : {Func::Re, Func::Im, Func::Abs2, Func::Exp, Func::Log, Func::Conj}) {
        if (id == func_name(f)) {
          expect('(');
          ExprPtr arg = parse_expr();
          expect(')');
          return make({.kind = ExprNode::Kind::Call, .func = f, .lhs = arg});
        }
      }
      throw Error(ErrorKind::UnknownIdentifier, "unknown identifier '" + std::string(id) +
                                                    "' at offset " + std::to_string(start));
    }
    throw Error::syntax(pos_, std::string("unexpected '") + c + "'");
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int recursion_ = 0;
  bool seen_[4] = {false, false, false, false};
};

void print_node(const ExprNode& n, std::string& out) {
  switch (n.kind) {
    case ExprNode::Kind::Number:
      out += n.number < 0 ? "(-" + fmt_real(-n.number) + ")" : fmt_real(n.number);
      return;
    case ExprNode::Kind::ImagUnit:
      out += "i";
      return;
    case ExprNode::Kind::Variable:
      out += var_name(n.var);
      return;
    case ExprNode::Kind::Call:
      out += func_name(n.func);
      out += "(";
      print_node(*n.lhs, out);
      out += ")";
      return;
    case ExprNode::Kind::Binary: {
      static constexpr const char* ops[] = {" + ", " - ", " * ", " / "};
      out += "(";
      print_node(*n.lhs, out);
      out += ops[static_cast<int>(n.op)];
      print_node(*n.rhs, out);
      out += ")";
      return;
    }
    case ExprNode::Kind::Negate:
      out += "(-";
      print_node(*n.lhs, out);
      out += ")";
      return;
    case ExprNode::Kind::Power:
      out += "(";
      print_node(*n.lhs, out);
      out += ")^" + std::to_string(n.exponent);
      return;
  }
}

cplx ipow(cplx base, int n) {
  const bool invert = n < 0;
  unsigned k = static_cast<unsigned>(invert ? -n : n);
  cplx acc = 1.0;
  while (k) {
    if (k & 1u) acc *= base;
    base *= base;
    k >>= 1u;
  }
  return invert ? 1.0 / acc : acc;
}

}  // namespace

bool same_ast(const ExprNode& a, const ExprNode& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case ExprNode::Kind::Number: return a.number == b.number;
    case ExprNode::Kind::ImagUnit: return true;
    case ExprNode::Kind::Variable: return a.var == b.var;
    case ExprNode::Kind::Call: return a.func == b.func && same_ast(*a.lhs, *b.lhs);
    case ExprNode::Kind::Binary:
      return a.op == b.op && same_ast(*a.lhs, *b.lhs) && same_ast(*a.rhs, *b.rhs);
    case ExprNode::Kind::Negate: return same_ast(*a.lhs, *b.lhs);
    case ExprNode::Kind::Power: return a.exponent == b.exponent && same_ast(*a.lhs, *b.lhs);
  }
  return false;
}

WeightExpr parse_weight(std::string_view text) {
  if (text.empty()) throw Error::syntax(0, "empty expression");
  if (text.size() > kMaxExprBytes) {
    throw Error(ErrorKind::InvalidParameter, "expression longer than 64 KiB");
  }
  Parser parser(text);
  WeightExpr out;
  out.root_ = parser.parse();
  if (ast_depth(*out.root_) > kMaxExprDepth) {
    throw Error(ErrorKind::DepthLimit, "expression tree deeper than " +
                                           std::to_string(kMaxExprDepth));
  }
  out.vars_ = parser.vars();
  out.compile(*out.root_);
  const bool has_tau = std::find(out.vars_.begin(), out.vars_.end(), Var::Tau) != out.vars_.end();
  // Default slots: (z) / (z1, z2) / (tau, z).
  out.bind(has_tau ? std::array<int, 4>{1, 0, 1, 0} : std::array<int, 4>{0, 0, 1, 0});
  return out;
}

std::string WeightExpr::print() const {
  std::string out;
  print_node(*root_, out);
  return out;
}

void WeightExpr::bind(const std::array<int, 4>& slot_of_var) {
  for (Instr& in : code_) {
    if (in.op == Instr::Op::Load) in.value = slot_of_var[static_cast<int>(in.arg)];
  }
}

void WeightExpr::compile(const ExprNode& root) {
  code_.clear();
  int depth = 0;
  max_stack_ = 0;
  auto push = [&](Instr in, int delta) {
    code_.push_back(in);
    depth += delta;
    max_stack_ = std::max(max_stack_, depth);
  };
  std::function<void(const ExprNode&)> emit = [&](const ExprNode& n) {
    using Op = Instr::Op;
    switch (n.kind) {
      case ExprNode::Kind::Number: push({Op::Const, cplx(n.number, 0.0)}, +1); return;
      case ExprNode::Kind::ImagUnit: push({Op::Const, cplx(0.0, 1.0)}, +1); return;
      case ExprNode::Kind::Variable:
        // value.real() holds the bound slot, arg the variable id.
        push({Op::Load, cplx(0.0), static_cast<int>(n.var)}, +1);
        return;
      case ExprNode::Kind::Call: {
        emit(*n.lhs);
        static constexpr Op ops[] = {Op::Re, Op::Im, Op::Abs2, Op::Exp, Op::Log, Op::Conj};
        push({ops[static_cast<int>(n.func)]}, 0);
        return;
      }
      case ExprNode::Kind::Binary: {
        emit(*n.lhs);
        emit(*n.rhs);
        static constexpr Op ops[] = {Op::Add, Op::Sub, Op::Mul, Op::Div};
        push({ops[static_cast<int>(n.op)]}, -1);
        return;
      }
      case ExprNode::Kind::Negate:
        emit(*n.lhs);
        push({Op::Neg}, 0);
        return;
      case ExprNode::Kind::Power:
        emit(*n.lhs);
        push({Op::Pow, cplx(0.0), n.exponent}, 0);
        return;
    }
  };
  emit(root);
}

cplx WeightExpr::eval(std::span<const cplx> slots) const {
  constexpr int kInline = 96;
  cplx inline_stack[kInline];
  std::vector<cplx> heap;
  cplx* st = inline_stack;
  if (max_stack_ > kInline) {
    heap.resize(max_stack_);
    st = heap.data();
  }
  int top = 0;
  for (const Instr& in : code_) {
    using Op = Instr::Op;
    switch (in.op) {
      case Op::Const: st[top++] = in.value; break;
      case Op::Load: {
        const auto slot = static_cast<std::size_t>(in.value.real());
        if (slot >= slots.size()) {
          throw Error(ErrorKind::InvalidParameter,
                      "variable '" + std::string(var_name(static_cast<Var>(in.arg))) +
                          "' is not bound at the evaluation point");
        }
        st[top++] = slots[slot];
        break;
      }
      case Op::Add: --top; st[top - 1] += st[top]; break;
      case Op::Sub: --top; st[top - 1] -= st[top]; break;
      case Op::Mul: --top; st[top - 1] *= st[top]; break;
      case Op::Div: --top; st[top - 1] /= st[top]; break;
      case Op::Neg: st[top - 1] = -st[top - 1]; break;
      case Op::Pow: st[top - 1] = ipow(st[top - 1], in.arg); break;
      case Op::Re: st[top - 1] = st[top - 1].real(); break;
      case Op::Im: st[top - 1] = st[top - 1].imag(); break;
      case Op::Abs2: st[top - 1] = std::norm(st[top - 1]); break;
      case Op::Exp: st[top - 1] = std::exp(st[top - 1]); break;
      case Op::Log: st[top - 1] = std::log(st[top - 1]); break;
      case Op::Conj: st[top - 1] = std::conj(st[top - 1]); break;
    }
  }
  return st[0];
}

// ---------------------------------------------------------------------------
// WeightField
// ---------------------------------------------------------------------------

class WeightField::Impl {
 public:
  virtual ~Impl() = default;
  virtual Binding binding() const = 0;
  virtual cplx raw(std::span<const cplx> p) const = 0;
  virtual std::optional<double> zzbar(cplx) const { return std::nullopt; }
  virtual std::string describe() const = 0;
};

namespace {

class ZeroImpl final : public WeightField::Impl {
 public:
  explicit ZeroImpl(Binding b) : b_(b) {}
  Binding binding() const override { return b_; }
  cplx raw(std::span<const cplx>) const override { return 0.0; }
  std::optional<double> zzbar(cplx) const override { return 0.0; }
  std::string describe() const override { return "zero"; }

 private:
  Binding b_;
};

class GaussianImpl final : public WeightField::Impl {
 public:
  GaussianImpl(double lambda, cplx center) : lambda_(lambda), center_(center) {}
  Binding binding() const override { return Binding::Z; }
  cplx raw(std::span<const cplx> p) const override { return lambda_ * std::norm(p[0] - center_); }
  std::optional<double> zzbar(cplx) const override { return lambda_; }
  std::string describe() const override {
    return "gauss:" + fmt_real(lambda_) + "@" + format_complex(center_);
  }

 private:
  double lambda_;
  cplx center_;
};

class HarmonicImpl final : public WeightField::Impl {
 public:
  explicit HarmonicImpl(std::vector<cplx> c) : c_(std::move(c)) {}
  Binding binding() const override { return Binding::Z; }
  cplx raw(std::span<const cplx> p) const override {
    cplx acc = 0.0;
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * p[0] + *it;
    return 2.0 * acc.real();
  }
  std::optional<double> zzbar(cplx) const override { return 0.0; }
  std::string describe() const override {
    std::string out = "harm:";
    for (std::size_t k = 0; k < c_.size(); ++k) {
      if (k) out += ",";
      out += format_complex(c_[k]);
    }
    return out;
  }

 private:
  std::vector<cplx> c_;
};

class ExprImpl final : public WeightField::Impl {
 public:
  ExprImpl(WeightExpr e, Binding b, std::string text)
      : e_(std::move(e)), b_(b), text_(std::move(text)) {}
  Binding binding() const override { return b_; }
  cplx raw(std::span<const cplx> p) const override { return e_.eval(p); }
  std::string describe() const override { return "expr:" + text_; }

 private:
  WeightExpr e_;
  Binding b_;
  std::string text_;
};

class CustomImpl final : public WeightField::Impl {
 public:
  CustomImpl(std::function<double(std::span<const cplx>)> fn, Binding b, std::string desc,
             std::function<double(cplx)> zz)
      : fn_(std::move(fn)), b_(b), desc_(std::move(desc)), zz_(std::move(zz)) {}
  Binding binding() const override { return b_; }
  cplx raw(std::span<const cplx> p) const override { return fn_(p); }
  std::optional<double> zzbar(cplx z) const override {
    if (!zz_) return std::nullopt;
    return zz_(z);
  }
  std::string describe() const override { return desc_; }

 private:
  std::function<double(std::span<const cplx>)> fn_;
  Binding b_;
  std::string desc_;
  std::function<double(cplx)> zz_;
};

class AffineImpl final : public WeightField::Impl {
 public:
  AffineImpl(std::shared_ptr<const WeightField::Impl> base, double scale, double shift)
      : base_(std::move(base)), scale_(scale), shift_(shift) {}
  Binding binding() const override { return base_->binding(); }
  cplx raw(std::span<const cplx> p) const override { return scale_ * base_->raw(p) + shift_; }
  std::optional<double> zzbar(cplx z) const override {
    auto v = base_->zzbar(z);
    if (!v) return std::nullopt;
    return scale_ * *v;
  }
  std::string describe() const override {
    std::string out = base_->describe();
    if (scale_ != 1.0) out = "scaled:" + fmt_real(scale_) + ":" + out;
    if (shift_ != 0.0) out = "shifted:" + fmt_real(shift_) + ":" + out;
    return out;
  }

 private:
  std::shared_ptr<const WeightField::Impl> base_;
  double scale_;
  double shift_;
};

Binding infer_binding(const std::vector<Var>& vars) {
  const auto has = [&](Var v) { return std::find(vars.begin(), vars.end(), v) != vars.end(); };
  if (has(Var::Tau)) return Binding::TauZ;
  if (has(Var::Z1) || has(Var::Z2)) return Binding::Z1Z2;
  return Binding::Z;
}

std::array<int, 4> slots_for(Binding b, const std::vector<Var>& vars) {
  constexpr int kUnbound = 1 << 20;
  std::array<int, 4> slot{kUnbound, kUnbound, kUnbound, kUnbound};
  switch (b) {
    case Binding::Z: slot[static_cast<int>(Var::Z)] = 0; break;
    case Binding::Z1Z2:
      slot[static_cast<int>(Var::Z1)] = 0;
      slot[static_cast<int>(Var::Z2)] = 1;
      break;
    case Binding::TauZ:
      slot[static_cast<int>(Var::Tau)] = 0;
      slot[static_cast<int>(Var::Z)] = 1;
      break;
  }
  for (Var v : vars) {
    if (slot[static_cast<int>(v)] == kUnbound) {
      throw Error(ErrorKind::InvalidParameter,
                  "variable '" + std::string(var_name(v)) + "' is not allowed for this weight");
    }
  }
  return slot;
}

}  // namespace

WeightField::WeightField() : impl_(std::make_shared<ZeroImpl>(Binding::Z)) {}

WeightField WeightField::zero(Binding binding) {
  return WeightField(std::make_shared<ZeroImpl>(binding));
}

WeightField WeightField::gaussian(double lambda, cplx center) {
  if (!std::isfinite(lambda)) throw Error(ErrorKind::InvalidParameter, "gaussian: lambda not finite");
  return WeightField(std::make_shared<GaussianImpl>(lambda, center));
}

WeightField WeightField::harmonic_re_poly(std::vector<cplx> coefficients) {
  return WeightField(std::make_shared<HarmonicImpl>(std::move(coefficients)));
}

WeightField WeightField::expression(const WeightExpr& expr, std::optional<Binding> binding) {
  const Binding b = binding.value_or(infer_binding(expr.variables()));
  WeightExpr bound = expr;
  bound.bind(slots_for(b, expr.variables()));
  return WeightField(std::make_shared<ExprImpl>(std::move(bound), b, expr.print()));
}

WeightField WeightField::expression(std::string_view text, std::optional<Binding> binding) {
  const WeightExpr expr = parse_weight(text);
  const Binding b = binding.value_or(infer_binding(expr.variables()));
  WeightExpr bound = expr;
  bound.bind(slots_for(b, expr.variables()));
  return WeightField(std::make_shared<ExprImpl>(std::move(bound), b, std::string(text)));
}

WeightField WeightField::custom(std::function<double(std::span<const cplx>)> fn, Binding binding,
                                std::string description, std::function<double(cplx)> zzbar) {
  return WeightField(std::make_shared<CustomImpl>(std::move(fn), binding, std::move(description),
                                                  std::move(zzbar)));
}

WeightField WeightField::scaled(double m) const {
  return WeightField(std::make_shared<AffineImpl>(impl_, m, 0.0));
}

WeightField WeightField::shifted(double c) const {
  return WeightField(std::make_shared<AffineImpl>(impl_, 1.0, c));
}

Binding WeightField::binding() const { return impl_->binding(); }

double WeightField::eval(std::span<const cplx> point) const {
  if (static_cast<int>(point.size()) != arity()) {
    throw Error(ErrorKind::InvalidParameter, "weight evaluated with " +
                                                 std::to_string(point.size()) +
                                                 " coordinates, expects " +
                                                 std::to_string(arity()));
  }
  const cplx v = impl_->raw(point);
  if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
    throw Error(ErrorKind::NumericalEvaluation,
                "weight '" + describe() + "' is not finite at " + format_complex(point[0]) +
                    (point.size() > 1 ? ", " + format_complex(point[1]) : std::string()));
  }
  if (std::abs(v.imag()) > kImaginaryResidueTolerance * (1.0 + std::abs(v.real()))) {
    throw Error(ErrorKind::NotAWeight,
                "weight '" + describe() + "' has imaginary part " + fmt_real(v.imag()) + " at " +
                    format_complex(point[0]));
  }
  return v.real();
}

std::optional<double> WeightField::exact_zzbar(cplx z) const {
  if (binding() != Binding::Z) return std::nullopt;
  return impl_->zzbar(z);
}

std::string WeightField::describe() const { return impl_->describe(); }

double eval_weight(const WeightField& w, std::span<const cplx> point) { return w.eval(point); }

// ---------------------------------------------------------------------------
// MetricField
// ---------------------------------------------------------------------------

MetricField MetricField::from_entries(int rank, const std::vector<std::string>& upper) {
  if (rank < 1) throw Error(ErrorKind::InvalidParameter, "metric rank must be at least 1");
  const std::size_t expected = static_cast<std::size_t>(rank) * (rank + 1) / 2;
  if (upper.size() != expected) {
    throw Error(ErrorKind::InvalidParameter, "metric of rank " + std::to_string(rank) +
                                                 " needs " + std::to_string(expected) +
                                                 " upper-triangular entries");
  }
  MetricField m;
  m.rank_ = rank;
  m.texts_ = upper;
  for (const std::string& t : upper) {
    WeightExpr e = parse_weight(t);
    e.bind(slots_for(Binding::Z, e.variables()));
    m.exprs_.push_back(std::move(e));
  }
  return m;
}

MetricField MetricField::constant(const Eigen::MatrixXcd& H) {
  if (H.rows() != H.cols() || H.rows() < 1) {
    throw Error(ErrorKind::InvalidParameter, "constant metric must be square");
  }
  std::vector<std::string> upper;
  for (Eigen::Index i = 0; i < H.rows(); ++i) {
    for (Eigen::Index j = i; j < H.cols(); ++j) upper.push_back(complex_literal(H(i, j)));
  }
  return from_entries(static_cast<int>(H.rows()), upper);
}

Eigen::MatrixXcd MetricField::eval_unchecked(cplx z) const {
  Eigen::MatrixXcd H(rank_, rank_);
  std::size_t k = 0;
  for (int i = 0; i < rank_; ++i) {
    for (int j = i; j < rank_; ++j, ++k) {
      const cplx v = exprs_[k].eval(std::span<const cplx>(&z, 1));
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
        throw Error(ErrorKind::NumericalEvaluation,
                    "metric entry (" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                        ") not finite at " + format_complex(z));
      }
      if (i == j) {
        if (std::abs(v.imag()) > kImaginaryResidueTolerance * (1.0 + std::abs(v.real()))) {
          throw Error(ErrorKind::NotAWeight, "metric diagonal entry " + std::to_string(i + 1) +
                                                 " is not real at " + format_complex(z));
        }
        H(i, i) = v.real();
      } else {
        H(i, j) = v;
        H(j, i) = std::conj(v);
      }
    }
  }
  return H;
}

Eigen::MatrixXcd MetricField::eval(cplx z) const {
  Eigen::MatrixXcd H = eval_unchecked(z);
  Eigen::LLT<Eigen::MatrixXcd> llt(H);
  bool ok = llt.info() == Eigen::Success;
  if (ok) {
    const Eigen::VectorXd d = Eigen::MatrixXcd(llt.matrixL()).diagonal().real();
    const double scale = H.diagonal().real().cwiseAbs().maxCoeff();
    ok = d.minCoeff() * d.minCoeff() > 1e-13 * scale;
  }
  if (!ok) {
    throw Error(ErrorKind::MetricNotPositive,
                "metric is not positive definite at z = " + format_complex(z));
  }
  return H;
}

MetricField MetricField::congruent(const Eigen::MatrixXcd& Q) const {
  if (Q.rows() != rank_ || Q.cols() != rank_) {
    throw Error(ErrorKind::InvalidParameter, "congruence matrix has wrong shape");
  }
  auto entry_text = [&](int k, int l) -> std::string {
    if (k <= l) {
      const std::size_t idx = static_cast<std::size_t>(k) * rank_ - k * (k - 1) / 2 + (l - k);
      return "(" + texts_[idx] + ")";
    }
    const std::size_t idx = static_cast<std::size_t>(l) * rank_ - l * (l - 1) / 2 + (k - l);
    return "conj(" + texts_[idx] + ")";
  };
  std::vector<std::string> upper;
  for (int i = 0; i < rank_; ++i) {
    for (int j = i; j < rank_; ++j) {
      std::string text;
      for (int k = 0; k < rank_; ++k) {
        for (int l = 0; l < rank_; ++l) {
          const cplx c = std::conj(Q(k, i)) * Q(l, j);
          if (c == 0.0) continue;
          if (!text.empty()) text += " + ";
          text += complex_literal(c) + "*" + entry_text(k, l);
        }
      }
      upper.push_back(text.empty() ? "0" : text);
    }
  }
  return from_entries(rank_, upper);
}

std::string MetricField::describe() const {
  std::string out = "metric:[";
  std::size_t k = 0;
  for (int i = 0; i < rank_; ++i) {
    out += i ? ",[" : "[";
    for (int j = 0; j < rank_; ++j) {
      if (j) out += ",";
      out += j < i ? std::string(".") : texts_[k++];
    }
    out += "]";
  }
  return out + "]";
}

Eigen::MatrixXcd eval_metric(const MetricField& m, cplx z) { return m.eval(z); }

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

double default_fd_step(cplx z) { return 1e-3 * std::max(1.0, std::abs(z)); }

cplx wirtinger_mixed(const std::function<cplx(cplx, cplx)>& f, cplx z1, cplx z2, int j, int k,
                     std::optional<double> step) {
  if (j < 0 || j > 1 || k < 0 || k > 1) {
    throw Error(ErrorKind::InvalidParameter, "wirtinger_mixed: variable index must be 0 or 1");
  }
  const double h0 = step.value_or(1e-3 * std::max({1.0, std::abs(z1), std::abs(z2)}));
  const cplx I(0.0, 1.0);
  auto at = [&](std::array<cplx, 2> p) {
    const cplx v = f(p[0], p[1]);
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
      throw Error(ErrorKind::NumericalEvaluation, "non-finite value in mixed-derivative stencil");
    }
    return v;
  };
  // Second directional derivative along real directions u (in variable a)
  // and v (in variable b), each a unit displacement 1 or i.
  auto d2 = [&](int a, cplx u, int b, cplx v, double h) {
    auto shifted = [&](double su, double sv) {
      std::array<cplx, 2> p{z1, z2};
      p[a] += su * h * u;
      p[b] += sv * h * v;
      return at(p);
    };
    return (shifted(1, 1) - shifted(1, -1) - shifted(-1, 1) + shifted(-1, -1)) / (4.0 * h * h);
  };
  auto stencil = [&](double h) {
    const cplx xx = d2(j, 1.0, k, 1.0, h);
    const cplx xy = d2(j, 1.0, k, I, h);
    const cplx yx = d2(j, I, k, 1.0, h);
    const cplx yy = d2(j, I, k, I, h);
    return 0.25 * (xx + I * xy - I * yx + yy);
  };
  const cplx coarse = stencil(h0);
  const cplx fine = stencil(0.5 * h0);
  return (4.0 * fine - coarse) / 3.0;
}

}  // namespace l2ext
