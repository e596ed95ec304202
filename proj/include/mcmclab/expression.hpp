#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mcmclab {

/// Value and first derivative carried together (forward-mode differentiation).
struct Dual {
  double value = 0.0;
  double deriv = 0.0;
};

// Arithmetic expression in one variable `x`, as used for custom log-densities.
//
// Grammar: + - * / ^ (right-associative), unary minus, parentheses, the
// functions exp, log, abs, the constants pi and e, numeric literals and x.
// Parsing compiles to a postfix program; evaluation returns the value and the
// exact derivative with respect to x.
class Expression {
 public:
  /// Throws UsageError naming the offending token on malformed input.
  static Expression parse(std::string_view text);

  Dual eval(double x) const;
  double value(double x) const { return eval(x).value; }

  const std::string& source() const { return source_; }

 private:
  enum class Op { kConst, kVar, kAdd, kSub, kMul, kDiv, kPow, kNeg, kExp, kLog, kAbs };
  struct Instr {
    Op op;
    double constant = 0.0;
  };

  friend class ExpressionParser;

  std::string source_;
  std::vector<Instr> program_;
  std::size_t max_stack_ = 0;
};

}  // namespace mcmclab
