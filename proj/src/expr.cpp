#include "smanifold/expr.hpp"

#include <Eigen/Core>
#include <unsupported/Eigen/AutoDiff>

#include <cctype>
#include <cmath>
#include <cstdlib>

namespace smanifold {

namespace {

enum class Tok { Num, Var, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, End };

struct Token {
  Tok kind;
  std::string text;
  double value = 0.0;
  int line = 1;
  int column = 1;
};

std::vector<Token> tokenize(const std::string& s) {
  std::vector<Token> out;
  int line = 1, col = 1;
  size_t i = 0;
  auto advance = [&](size_t n) {
    for (size_t k = 0; k < n; ++k) {
      if (s[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++i;
    }
  };
  while (i < s.size()) {
    char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    Token t{Tok::End, "", 0.0, line, col};
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = s.c_str() + i;
      char* end = nullptr;
      double v = std::strtod(begin, &end);
      size_t n = static_cast<size_t>(end - begin);
      if (n == 0) throw ParseError("malformed number", line, col, std::string(1, c));
      t.kind = Tok::Num;
      t.value = v;
      t.text = s.substr(i, n);
      advance(n);
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t j = i;
      while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_')) ++j;
      t.text = s.substr(i, j - i);
      bool var = t.text.size() > 1 && t.text[0] == 'u';
      for (size_t k = 1; var && k < t.text.size(); ++k)
        var = std::isdigit(static_cast<unsigned char>(t.text[k])) != 0;
      t.kind = var ? Tok::Var : Tok::Ident;
      advance(j - i);
    } else {
      t.text = std::string(1, c);
      switch (c) {
        case '+': t.kind = Tok::Plus; break;
        case '-': t.kind = Tok::Minus; break;
        case '*': t.kind = Tok::Star; break;
        case '/': t.kind = Tok::Slash; break;
        case '^': t.kind = Tok::Caret; break;
        case '(': t.kind = Tok::LParen; break;
        case ')': t.kind = Tok::RParen; break;
        default: throw ParseError("unexpected character", line, col, t.text);
      }
      advance(1);
    }
    out.push_back(t);
  }
  out.push_back(Token{Tok::End, "", 0.0, line, col});
  return out;
}

using Code = std::vector<Expr::Instr>;

bool is_const(const Code& c) { return c.size() == 1 && c[0].op == Expr::Op::Const; }

}  // namespace

class ExprCompiler {
 public:
  ExprCompiler(const std::string& text, int dim) : toks_(tokenize(text)), dim_(dim) {}

  Expr compile(const std::string& text) {
    Code code = expr();
    if (peek().kind != Tok::End) fail("unexpected token");
    Expr e;
    e.text_ = text;
    e.dim_ = dim_;
    e.max_var_ = max_var_;
    e.code_ = std::move(code);
    int depth = 0, best = 0;
    for (const auto& in : e.code_) {
      switch (in.op) {
        case Expr::Op::Const:
        case Expr::Op::Var: ++depth; break;
        case Expr::Op::Add:
        case Expr::Op::Sub:
        case Expr::Op::Mul:
        case Expr::Op::Div:
        case Expr::Op::Pow: --depth; break;
        default: break;
      }
      best = std::max(best, depth);
    }
    e.max_stack_ = best;
    return e;
  }

 private:
  std::vector<Token> toks_;
  size_t pos_ = 0;
  int dim_;
  int max_var_ = 0;

  const Token& peek() const { return toks_[pos_]; }
  Token take() { return toks_[pos_++]; }
  [[noreturn]] void fail(const std::string& msg) const {
    const Token& t = peek();
    throw ParseError(msg, t.line, t.column, t.text);
  }

  static Code join(Code a, const Code& b, Expr::Op op) {
    if (is_const(a) && is_const(b)) {
      double x = a[0].value, y = b[0].value;
      double v = op == Expr::Op::Add   ? x + y
                 : op == Expr::Op::Sub ? x - y
                 : op == Expr::Op::Mul ? x * y
                                       : x / y;
      return Code{{Expr::Op::Const, v, 0}};
    }
    a.insert(a.end(), b.begin(), b.end());
    a.push_back({op, 0.0, 0});
    return a;
  }

  Code expr() {
    Code lhs = term();
    while (peek().kind == Tok::Plus || peek().kind == Tok::Minus) {
      auto op = take().kind == Tok::Plus ? Expr::Op::Add : Expr::Op::Sub;
      lhs = join(std::move(lhs), term(), op);
    }
    return lhs;
  }

  Code term() {
    Code lhs = unary();
    while (peek().kind == Tok::Star || peek().kind == Tok::Slash) {
      auto op = take().kind == Tok::Star ? Expr::Op::Mul : Expr::Op::Div;
      lhs = join(std::move(lhs), unary(), op);
    }
    return lhs;
  }

  Code unary() {
    if (peek().kind == Tok::Minus) {
      take();
      Code c = unary();
      if (is_const(c)) {
        c[0].value = -c[0].value;
        return c;
      }
      c.push_back({Expr::Op::Neg, 0.0, 0});
      return c;
    }
    if (peek().kind == Tok::Plus) {
      take();
      return unary();
    }
    return power();
  }

  Code power() {
    Code base = primary();
    if (peek().kind != Tok::Caret) return base;
    take();
    Code ex = unary();
    if (is_const(ex)) {
      double n = ex[0].value;
      if (is_const(base)) return Code{{Expr::Op::Const, std::pow(base[0].value, n), 0}};
      if (n == std::round(n) && std::abs(n) <= 64) {
        base.push_back({Expr::Op::PowInt, 0.0, static_cast<int>(n)});
        return base;
      }
    }
    base.insert(base.end(), ex.begin(), ex.end());
    base.push_back({Expr::Op::Pow, 0.0, 0});
    return base;
  }

  Code primary() {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::Num: {
        double v = take().value;
        return Code{{Expr::Op::Const, v, 0}};
      }
      case Tok::Var: {
        int idx = std::atoi(t.text.c_str() + 1);
        if (idx < 1 || idx > dim_) fail("variable index out of range");
        take();
        max_var_ = std::max(max_var_, idx);
        return Code{{Expr::Op::Var, 0.0, idx - 1}};
      }
      case Tok::Ident: {
        Expr::Op op;
        if (t.text == "exp") op = Expr::Op::Exp;
        else if (t.text == "ln" || t.text == "log") op = Expr::Op::Ln;
        else if (t.text == "sqrt") op = Expr::Op::Sqrt;
        else if (t.text == "sin") op = Expr::Op::Sin;
        else if (t.text == "cos") op = Expr::Op::Cos;
        else fail("unknown identifier");
        take();
        if (peek().kind != Tok::LParen) fail("expected '('");
        take();
        Code arg = expr();
        if (peek().kind != Tok::RParen) fail("expected ')'");
        take();
        arg.push_back({op, 0.0, 0});
        return arg;
      }
      case Tok::LParen: {
        take();
        Code inner = expr();
        if (peek().kind != Tok::RParen) fail("expected ')'");
        take();
        return inner;
      }
      case Tok::End: fail("unexpected end of input");
      default: fail("unexpected token");
    }
  }
};

Expr Expr::parse(const std::string& text, int dim) {
  ExprCompiler c(text, dim);
  return c.compile(text);
}

namespace {

using std::cos;
using std::exp;
using std::log;
using std::sin;
using std::sqrt;

template <class T>
T ipow(const T& x, int n) {
  if (n == 0) return T(1.0);
  bool neg = n < 0;
  unsigned m = static_cast<unsigned>(neg ? -n : n);
  T acc = x;
  T result(1.0);
  bool first = true;
  while (m) {
    if (m & 1u) {
      if (first) {
        result = acc;
        first = false;
      } else {
        result = result * acc;
      }
    }
    m >>= 1u;
    if (m) acc = acc * acc;
  }
  return neg ? T(1.0) / result : result;
}

}  // namespace

template <class T>
T Expr::run(const T* u) const {
  std::vector<T> st;
  st.reserve(static_cast<size_t>(max_stack_) + 1);
  for (const auto& in : code_) {
    switch (in.op) {
      case Op::Const: st.push_back(T(in.value)); break;
      case Op::Var: st.push_back(u[in.index]); break;
      case Op::Neg: st.back() = -st.back(); break;
      case Op::PowInt: st.back() = ipow(st.back(), in.index); break;
      case Op::Exp: st.back() = exp(st.back()); break;
      case Op::Ln: st.back() = log(st.back()); break;
      case Op::Sqrt: st.back() = sqrt(st.back()); break;
      case Op::Sin: st.back() = sin(st.back()); break;
      case Op::Cos: st.back() = cos(st.back()); break;
      default: {
        T b = st.back();
        st.pop_back();
        T& a = st.back();
        switch (in.op) {
          case Op::Add: a = a + b; break;
          case Op::Sub: a = a - b; break;
          case Op::Mul: a = a * b; break;
          case Op::Div: a = a / b; break;
          case Op::Pow: a = exp(b * log(a)); break;
          default: break;
        }
      }
    }
  }
  return st.empty() ? T(0.0) : st.back();
}

double Expr::eval(const double* u) const { return run<double>(u); }

double Expr::eval_grad(const double* u, double* grad) const {
  using AD = Eigen::AutoDiffScalar<Eigen::VectorXd>;
  std::vector<AD> x(static_cast<size_t>(dim_));
  for (int i = 0; i < dim_; ++i) x[i] = AD(u[i], dim_, i);
  AD r = run<AD>(x.data());
  for (int i = 0; i < dim_; ++i) grad[i] = r.derivatives().size() ? r.derivatives()[i] : 0.0;
  return r.value();
}

}  // namespace smanifold
