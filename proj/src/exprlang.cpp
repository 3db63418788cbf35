#include "hamcouple/exprlang.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <numbers>

#include "hamcouple/error.hpp"

namespace hamcouple::expr {

namespace {

using NodePtr = std::shared_ptr<const Node>;

struct FunctionInfo {
  std::string_view name;
  Function function;
  int arity;
};

constexpr FunctionInfo kFunctions[] = {
    {"sin", Function::Sin, 1},   {"cos", Function::Cos, 1},   {"exp", Function::Exp, 1},
    {"ln", Function::Ln, 1},     {"abs", Function::Abs, 1},   {"sqrt", Function::Sqrt, 1},
    {"atan", Function::Atan, 1}, {"pos", Function::Pos, 1},   {"neg", Function::Neg, 1},
    {"min", Function::Min, 2},   {"max", Function::Max, 2},
};

const FunctionInfo* find_function(std::string_view name) {
  for (const auto& info : kFunctions) {
    if (info.name == name) return &info;
  }
  return nullptr;
}

NodePtr make_number(double x) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Number;
  n->number = x;
  return n;
}

NodePtr make_unary(NodeKind kind, NodePtr a) {
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->args = {std::move(a)};
  return n;
}

NodePtr make_binary(NodeKind kind, NodePtr a, NodePtr b) {
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->args = {std::move(a), std::move(b)};
  return n;
}

// Recursive-descent parser.
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?
//   primary := number | ident | ident '(' args ')' | '(' expr ')'
class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  NodePtr parse() {
    auto e = parse_expr();
    skip_ws();
    if (pos_ != src_.size()) fail("expected operator or end of input");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw SyntaxError(pos_, what); }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr parse_expr() {
    auto lhs = parse_term();
    for (;;) {
      if (accept('+')) {
        lhs = make_binary(NodeKind::Add, lhs, parse_term());
      } else if (accept('-')) {
        lhs = make_binary(NodeKind::Sub, lhs, parse_term());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_term() {
    auto lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = make_binary(NodeKind::Mul, lhs, parse_unary());
      } else if (accept('/')) {
        lhs = make_binary(NodeKind::Div, lhs, parse_unary());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_unary() {
    if (accept('-')) return make_unary(NodeKind::Negate, parse_unary());
    return parse_power();
  }

  NodePtr parse_power() {
    auto base = parse_primary();
    if (accept('^')) return make_binary(NodeKind::Pow, base, parse_unary());
    return base;
  }

  NodePtr parse_primary() {
    skip_ws();
    if (pos_ >= src_.size()) fail("expected number, identifier or '('");
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      auto inner = parse_expr();
      if (!accept(')')) fail("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
    fail(std::string("unexpected character '") + c + "'");
  }

  NodePtr parse_number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      std::size_t n = 0;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        ++pos_;
        ++n;
      }
      return n;
    };
    std::size_t n = digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      n += digits();
    }
    if (n == 0) {
      pos_ = start;
      fail("expected digits");
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (digits() == 0) fail("expected exponent digits");
    }
    const std::string text(src_.substr(start, pos_ - start));
    return make_number(std::strtod(text.c_str(), nullptr));
  }

  NodePtr parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
      ++pos_;
    }
    const std::string name(src_.substr(start, pos_ - start));
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == '(') {
      const FunctionInfo* info = find_function(name);
      if (info == nullptr) {
        pos_ = start;
        fail("unknown function '" + name + "'");
      }
      ++pos_;
      auto n = std::make_shared<Node>();
      n->kind = NodeKind::Call;
      n->function = info->function;
      n->args.push_back(parse_expr());
      while (accept(',')) n->args.push_back(parse_expr());
      if (!accept(')')) fail("expected ',' or ')'");
      if (static_cast<int>(n->args.size()) != info->arity) {
        pos_ = start;
        fail("function '" + name + "' takes " + std::to_string(info->arity) + " argument(s)");
      }
      return n;
    }
    if (find_function(name) != nullptr) {
      pos_ = start;
      fail("function '" + name + "' requires '('");
    }
    if (name == "pi") return make_number(std::numbers::pi);
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Variable;
    n->name = name;
    return n;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

void collect_variables(const Node& n, std::set<std::string>& out) {
  if (n.kind == NodeKind::Variable) out.insert(n.name);
  for (const auto& a : n.args) collect_variables(*a, out);
}

void write_number(std::string& out, double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  out += buf;
}

void unparse(const Node& n, std::string& out) {
  switch (n.kind) {
    case NodeKind::Number:
      write_number(out, n.number);
      return;
    case NodeKind::Variable:
      out += n.name;
      return;
    case NodeKind::Negate:
      out += "(-";
      unparse(*n.args[0], out);
      out += ')';
      return;
    case NodeKind::Call:
      out += function_name(n.function);
      out += '(';
      for (std::size_t i = 0; i < n.args.size(); ++i) {
        if (i > 0) out += ", ";
        unparse(*n.args[i], out);
      }
      out += ')';
      return;
    default:
      break;
  }
  static constexpr char kOps[] = {'+', '-', '*', '/', '^'};
  const auto index = static_cast<int>(n.kind) - static_cast<int>(NodeKind::Add);
  out += '(';
  unparse(*n.args[0], out);
  out += ' ';
  out += kOps[index];
  out += ' ';
  unparse(*n.args[1], out);
  out += ')';
}

bool same_tree(const Node& a, const Node& b) {
  if (a.kind != b.kind || a.args.size() != b.args.size()) return false;
  switch (a.kind) {
    case NodeKind::Number:
      if (a.number != b.number) return false;
      break;
    case NodeKind::Variable:
      if (a.name != b.name) return false;
      break;
    case NodeKind::Call:
      if (a.function != b.function) return false;
      break;
    default:
      break;
  }
  for (std::size_t i = 0; i < a.args.size(); ++i) {
    if (!same_tree(*a.args[i], *b.args[i])) return false;
  }
  return true;
}

[[noreturn]] void domain(const char* what) { throw DomainError(what); }

}  // namespace

std::string_view function_name(Function f) {
  for (const auto& info : kFunctions) {
    if (info.function == f) return info.name;
  }
  return "?";
}

std::set<std::string> Expr::free_variables() const {
  std::set<std::string> out;
  if (root_) collect_variables(*root_, out);
  return out;
}

std::string Expr::to_string() const {
  std::string out;
  if (root_) unparse(*root_, out);
  return out;
}

bool operator==(const Expr& a, const Expr& b) {
  if (!a.root_ || !b.root_) return a.root_ == b.root_;
  return same_tree(*a.root_, *b.root_);
}

Expr parse_expr(std::string_view src) { return Expr(Parser(src).parse()); }

CompiledExpr::CompiledExpr(const Expr& e, std::span<const std::string> slots, const Binding& constants)
    : uses_slot_(slots.size(), false) {
  // Post-order flattening; operands always precede their consumer.
  auto emit = [&](auto&& self, const Node& n) -> std::int32_t {
    Instr ins{n.kind, n.function};
    switch (n.kind) {
      case NodeKind::Number:
        ins.number = n.number;
        break;
      case NodeKind::Variable: {
        auto it = std::find(slots.begin(), slots.end(), n.name);
        if (it != slots.end()) {
          ins.slot = static_cast<std::int32_t>(it - slots.begin());
          uses_slot_[ins.slot] = true;
        } else if (auto c = constants.find(n.name); c != constants.end()) {
          ins.kind = NodeKind::Number;
          ins.number = c->second;
        } else {
          throw UnboundVariable(n.name);
        }
        break;
      }
      default:
        ins.a = self(self, *n.args[0]);
        if (n.args.size() > 1) ins.b = self(self, *n.args[1]);
        break;
    }
    tape_.push_back(ins);
    return static_cast<std::int32_t>(tape_.size() - 1);
  };
  if (!e.empty()) emit(emit, e.root());
}

bool CompiledExpr::independent_of(std::size_t slot) const {
  return slot >= uses_slot_.size() || !uses_slot_[slot];
}

bool CompiledExpr::is_constant_zero() const {
  return tape_.empty() || (tape_.size() == 1 && tape_[0].kind == NodeKind::Number && tape_[0].number == 0.0);
}

namespace {

double apply_value(NodeKind kind, Function f, double a, double b) {
  double r = 0.0;
  switch (kind) {
    case NodeKind::Negate:
      return -a;
    case NodeKind::Add:
      r = a + b;
      break;
    case NodeKind::Sub:
      r = a - b;
      break;
    case NodeKind::Mul:
      r = a * b;
      break;
    case NodeKind::Div:
      if (b == 0.0) domain("division by zero");
      r = a / b;
      break;
    case NodeKind::Pow:
      if (a < 0.0 && b != std::trunc(b)) domain("negative base with non-integer exponent");
      if (a == 0.0 && b < 0.0) domain("zero base with negative exponent");
      r = std::pow(a, b);
      break;
    case NodeKind::Call:
      switch (f) {
        case Function::Sin:
          return std::sin(a);
        case Function::Cos:
          return std::cos(a);
        case Function::Exp:
          r = std::exp(a);
          break;
        case Function::Ln:
          if (a <= 0.0) domain("ln of nonpositive argument");
          return std::log(a);
        case Function::Abs:
          return std::abs(a);
        case Function::Sqrt:
          if (a < 0.0) domain("sqrt of negative argument");
          return std::sqrt(a);
        case Function::Atan:
          return std::atan(a);
        case Function::Pos:
          return a > 0.0 ? a : 0.0;
        case Function::Neg:
          return a < 0.0 ? -a : 0.0;
        case Function::Min:
          return a <= b ? a : b;
        case Function::Max:
          return a >= b ? a : b;
      }
      break;
    default:
      break;
  }
  if (!std::isfinite(r)) domain("non-finite intermediate result");
  return r;
}

struct Workspace {
  std::vector<double> values;
  std::vector<double> derivs;
};

Workspace& workspace() {
  thread_local Workspace ws;
  return ws;
}

}  // namespace

double CompiledExpr::eval(std::span<const double> slot_values) const {
  if (tape_.empty()) return 0.0;
  auto& v = workspace().values;
  v.resize(tape_.size());
  for (std::size_t i = 0; i < tape_.size(); ++i) {
    const Instr& ins = tape_[i];
    switch (ins.kind) {
      case NodeKind::Number:
        v[i] = ins.number;
        break;
      case NodeKind::Variable:
        v[i] = slot_values[ins.slot];
        break;
      default:
        v[i] = apply_value(ins.kind, ins.function, v[ins.a], ins.b >= 0 ? v[ins.b] : 0.0);
        break;
    }
  }
  return v.back();
}

double CompiledExpr::eval_grad(std::span<const double> slot_values, std::span<const std::size_t> wrt,
                               std::span<double> grad) const {
  const std::size_t k = wrt.size();
  std::fill(grad.begin(), grad.end(), 0.0);
  if (tape_.empty()) return 0.0;
  auto& ws = workspace();
  auto& v = ws.values;
  auto& d = ws.derivs;
  v.resize(tape_.size());
  d.assign(tape_.size() * k, 0.0);

  for (std::size_t i = 0; i < tape_.size(); ++i) {
    const Instr& ins = tape_[i];
    double* di = d.data() + i * k;
    if (ins.kind == NodeKind::Number) {
      v[i] = ins.number;
      continue;
    }
    if (ins.kind == NodeKind::Variable) {
      v[i] = slot_values[ins.slot];
      for (std::size_t j = 0; j < k; ++j) di[j] = (wrt[j] == static_cast<std::size_t>(ins.slot)) ? 1.0 : 0.0;
      continue;
    }
    const double a = v[ins.a];
    const double b = ins.b >= 0 ? v[ins.b] : 0.0;
    const double* da = d.data() + static_cast<std::size_t>(ins.a) * k;
    const double* db = ins.b >= 0 ? d.data() + static_cast<std::size_t>(ins.b) * k : nullptr;
    const double r = apply_value(ins.kind, ins.function, a, b);
    v[i] = r;

    // Local partials: r = f(a, b)  =>  dr = fa*da + fb*db.
    double fa = 0.0;
    double fb = 0.0;
    bool pow_uses_log = false;
    switch (ins.kind) {
      case NodeKind::Negate:
        fa = -1.0;
        break;
      case NodeKind::Add:
        fa = 1.0;
        fb = 1.0;
        break;
      case NodeKind::Sub:
        fa = 1.0;
        fb = -1.0;
        break;
      case NodeKind::Mul:
        fa = b;
        fb = a;
        break;
      case NodeKind::Div:
        fa = 1.0 / b;
        fb = -a / (b * b);
        break;
      case NodeKind::Pow:
        fa = (b == 0.0) ? 0.0 : b * std::pow(a, b - 1.0);
        pow_uses_log = true;
        break;
      case NodeKind::Call:
        switch (ins.function) {
          case Function::Sin:
            fa = std::cos(a);
            break;
          case Function::Cos:
            fa = -std::sin(a);
            break;
          case Function::Exp:
            fa = r;
            break;
          case Function::Ln:
            fa = 1.0 / a;
            break;
          case Function::Abs:
            fa = a > 0.0 ? 1.0 : (a < 0.0 ? -1.0 : 0.0);
            break;
          case Function::Sqrt:
            fa = r > 0.0 ? 0.5 / r : std::numeric_limits<double>::infinity();
            break;
          case Function::Atan:
            fa = 1.0 / (1.0 + a * a);
            break;
          case Function::Pos:
            fa = a > 0.0 ? 1.0 : 0.0;
            break;
          case Function::Neg:
            fa = a < 0.0 ? -1.0 : 0.0;
            break;
          case Function::Min:
            (a <= b ? fa : fb) = 1.0;
            break;
          case Function::Max:
            (a >= b ? fa : fb) = 1.0;
            break;
        }
        break;
      default:
        break;
    }
    for (std::size_t j = 0; j < k; ++j) {
      double acc = 0.0;
      if (da[j] != 0.0) acc += fa * da[j];
      if (db != nullptr && db[j] != 0.0) {
        if (pow_uses_log) {
          if (a <= 0.0) domain("derivative of variable exponent needs positive base");
          acc += r * std::log(a) * db[j];
        } else {
          acc += fb * db[j];
        }
      }
      if (!std::isfinite(acc)) domain("non-finite derivative");
      di[j] = acc;
    }
  }
  const double* last = d.data() + (tape_.size() - 1) * k;
  std::copy(last, last + k, grad.begin());
  return v.back();
}

namespace {

CompiledExpr compile_for(const Expr& e, std::vector<std::string>& slots, std::vector<double>& values,
                         const Binding& b) {
  for (const auto& name : e.free_variables()) {
    auto it = b.find(name);
    if (it == b.end()) throw UnboundVariable(name);
    slots.push_back(name);
    values.push_back(it->second);
  }
  return CompiledExpr(e, slots);
}

}  // namespace

double eval_expr(const Expr& e, const Binding& b) {
  std::vector<std::string> slots;
  std::vector<double> values;
  return compile_for(e, slots, values, b).eval(values);
}

std::vector<double> grad_expr(const Expr& e, std::span<const std::string> vars, const Binding& b) {
  std::vector<std::string> slots;
  std::vector<double> values;
  for (const auto& name : vars) {
    auto it = b.find(name);
    if (it == b.end()) throw UnboundVariable(name);
  }
  CompiledExpr c = compile_for(e, slots, values, b);
  // Variables that are requested but absent from the tree get derivative 0.
  std::vector<std::size_t> wrt;
  wrt.reserve(vars.size());
  for (const auto& name : vars) {
    auto it = std::find(slots.begin(), slots.end(), name);
    wrt.push_back(it == slots.end() ? slots.size() : static_cast<std::size_t>(it - slots.begin()));
  }
  std::vector<double> grad(vars.size(), 0.0);
  c.eval_grad(values, wrt, grad);
  return grad;
}

}  // namespace hamcouple::expr
