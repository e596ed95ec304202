#include "mcmclab/expression.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>

#include "mcmclab/error.hpp"

namespace mcmclab {

class ExpressionParser {
 public:
  explicit ExpressionParser(std::string_view text) : text_(text) {}

  Expression run() {
    Expression out;
    out.source_ = std::string(text_);
    prog_ = &out.program_;
    parse_sum();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected token");
    if (prog_->empty()) fail("empty expression");
    std::size_t depth = 0;
    for (const auto& in : out.program_) {
      switch (in.op) {
        case Expression::Op::kConst:
        case Expression::Op::kVar:
          ++depth;
          break;
        case Expression::Op::kAdd:
        case Expression::Op::kSub:
        case Expression::Op::kMul:
        case Expression::Op::kDiv:
        case Expression::Op::kPow:
          --depth;
          break;
        default:
          break;
      }
      out.max_stack_ = std::max(out.max_stack_, depth);
    }
    return out;
  }

 private:
  using Op = Expression::Op;

  [[noreturn]] void fail(const std::string& what) const {
    std::size_t end = pos_;
    while (end < text_.size() && !std::isspace(static_cast<unsigned char>(text_[end]))) ++end;
    std::string token(text_.substr(pos_, end - pos_));
    if (token.empty()) token = "<end of input>";
    throw UsageError("log-density expression: " + what + " at '" + token + "' (offset " +
                     std::to_string(pos_) + ") in \"" + std::string(text_) + "\"");
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void emit(Op op, double c = 0.0) { prog_->push_back({op, c}); }

  void parse_sum() {
    parse_product();
    for (;;) {
      if (accept('+')) {
        parse_product();
        emit(Op::kAdd);
      } else if (accept('-')) {
        parse_product();
        emit(Op::kSub);
      } else {
        return;
      }
    }
  }

  void parse_product() {
    parse_unary();
    for (;;) {
      if (accept('*')) {
        parse_unary();
        emit(Op::kMul);
      } else if (accept('/')) {
        parse_unary();
        emit(Op::kDiv);
      } else {
        return;
      }
    }
  }

  void parse_unary() {
    if (accept('-')) {
      parse_unary();
      emit(Op::kNeg);
    } else if (accept('+')) {
      parse_unary();
    } else {
      parse_power();
    }
  }

  void parse_power() {
    parse_primary();
    if (accept('^')) {
      parse_unary();
      emit(Op::kPow);
    }
  }

  void parse_primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("expected operand");
    const char c = text_[pos_];
    if (accept('(')) {
      parse_sum();
      if (!accept(')')) fail("expected ')'");
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      double v = 0.0;
      const char* first = text_.data() + pos_;
      const char* last = text_.data() + text_.size();
      auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc()) fail("malformed number");
      pos_ += static_cast<std::size_t>(ptr - first);
      emit(Op::kConst, v);
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < text_.size() && std::isalnum(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      const std::string_view name = text_.substr(start, pos_ - start);
      if (name == "x") return emit(Op::kVar);
      if (name == "pi") return emit(Op::kConst, std::numbers::pi);
      if (name == "e") return emit(Op::kConst, std::numbers::e);
      Op fn;
      if (name == "exp") {
        fn = Op::kExp;
      } else if (name == "log") {
        fn = Op::kLog;
      } else if (name == "abs") {
        fn = Op::kAbs;
      } else {
        pos_ = start;
        fail("unknown identifier");
      }
      if (!accept('(')) fail("expected '(' after function name");
      parse_sum();
      if (!accept(')')) fail("expected ')'");
      emit(fn);
      return;
    }
    fail("unexpected character");
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::vector<Expression::Instr>* prog_ = nullptr;
};

Expression Expression::parse(std::string_view text) { return ExpressionParser(text).run(); }

Dual Expression::eval(double x) const {
  // Small fixed buffer covers every realistic density; fall back to the heap.
  Dual local[32];
  std::vector<Dual> heap;
  Dual* st = local;
  if (max_stack_ > 32) {
    heap.resize(max_stack_);
    st = heap.data();
  }
  std::size_t top = 0;
  for (const auto& in : program_) {
    switch (in.op) {
      case Op::kConst:
        st[top++] = {in.constant, 0.0};
        break;
      case Op::kVar:
        st[top++] = {x, 1.0};
        break;
      case Op::kNeg:
        st[top - 1] = {-st[top - 1].value, -st[top - 1].deriv};
        break;
      case Op::kExp: {
        const double v = std::exp(st[top - 1].value);
        st[top - 1] = {v, v * st[top - 1].deriv};
        break;
      }
      case Op::kLog: {
        const Dual a = st[top - 1];
        st[top - 1] = {std::log(a.value), a.deriv / a.value};
        break;
      }
      case Op::kAbs: {
        const Dual a = st[top - 1];
        const double s = a.value > 0 ? 1.0 : (a.value < 0 ? -1.0 : 0.0);
        st[top - 1] = {std::abs(a.value), s * a.deriv};
        break;
      }
      default: {
        const Dual b = st[--top];
        const Dual a = st[top - 1];
        Dual r;
        switch (in.op) {
          case Op::kAdd:
            r = {a.value + b.value, a.deriv + b.deriv};
            break;
          case Op::kSub:
            r = {a.value - b.value, a.deriv - b.deriv};
            break;
          case Op::kMul:
            r = {a.value * b.value, a.deriv * b.value + a.value * b.deriv};
            break;
          case Op::kDiv:
            r = {a.value / b.value, (a.deriv * b.value - a.value * b.deriv) / (b.value * b.value)};
            break;
          case Op::kPow: {
            const double v = std::pow(a.value, b.value);
            double d = 0.0;
            if (a.deriv != 0.0) d += b.value * std::pow(a.value, b.value - 1.0) * a.deriv;
            if (b.deriv != 0.0) d += v * std::log(a.value) * b.deriv;
            r = {v, d};
            break;
          }
          default:
            break;
        }
        st[top - 1] = r;
      }
    }
  }
  return st[0];
}

}  // namespace mcmclab
