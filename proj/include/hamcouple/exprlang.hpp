#pragma once

// Scalar expression language used to define Hamiltonians and coupling terms
// in configuration files. Grammar is documented in docs/expression-grammar.md.

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hamcouple::expr {

enum class NodeKind : std::uint8_t { Number, Variable, Negate, Add, Sub, Mul, Div, Pow, Call };

enum class Function : std::uint8_t { Sin, Cos, Exp, Ln, Abs, Sqrt, Atan, Pos, Neg, Min, Max };

struct Node {
  NodeKind kind = NodeKind::Number;
  double number = 0.0;
  std::string name;  // variable name
  Function function = Function::Sin;
  std::vector<std::shared_ptr<const Node>> args;
};

/// Immutable expression tree. Cheap to copy; safe to share across threads.
class Expr {
 public:
  Expr() = default;
  explicit Expr(std::shared_ptr<const Node> root) : root_(std::move(root)) {}

  const Node& root() const { return *root_; }
  bool empty() const { return root_ == nullptr; }
  std::set<std::string> free_variables() const;

  /// Fully parenthesized text that parses back to the same tree.
  std::string to_string() const;

  friend bool operator==(const Expr& a, const Expr& b);

 private:
  std::shared_ptr<const Node> root_;
};

using Binding = std::map<std::string, double, std::less<>>;

/// Throws SyntaxError carrying the byte offset of the offending token.
Expr parse_expr(std::string_view src);

/// Throws UnboundVariable or DomainError.
double eval_expr(const Expr& e, const Binding& b);

/// Forward-mode derivatives with respect to `vars`, in that order.
/// pos/neg/abs/min/max use the fixed one-sided convention: the derivative
/// of pos(s) is 1 for s > 0 and 0 otherwise (so 0 at the kink).
std::vector<double> grad_expr(const Expr& e, std::span<const std::string> vars, const Binding& b);

std::string_view function_name(Function f);

/// Flattened evaluation tape bound to a fixed slot layout. Variables listed
/// in `constants` are folded in at construction; every other free variable
/// must appear in `slots`.
class CompiledExpr {
 public:
  CompiledExpr() = default;
  CompiledExpr(const Expr& e, std::span<const std::string> slots, const Binding& constants = {});

  double eval(std::span<const double> slot_values) const;

  /// Value plus d/d(slot_values[wrt[k]]) written into grad[k].
  double eval_grad(std::span<const double> slot_values, std::span<const std::size_t> wrt,
                   std::span<double> grad) const;

  /// True when the expression does not depend on slot `slot`.
  bool independent_of(std::size_t slot) const;
  bool is_constant_zero() const;

 private:
  struct Instr {
    NodeKind kind;
    Function function;
    std::int32_t a = -1;
    std::int32_t b = -1;
    std::int32_t slot = -1;
    double number = 0.0;
  };
  std::vector<Instr> tape_;
  std::vector<bool> uses_slot_;
};

}  // namespace hamcouple::expr
