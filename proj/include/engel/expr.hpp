// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * @file expr.hpp
 * @brief Arithmetic expressions over named coordinates, evaluated on jets.
 *
 * Grammar (whitespace is ignored):
 *
 *     expr    := term (('+' | '-') term)*
 *     term    := unary (('*' | '/') unary)*
 *     unary   := ('+' | '-') unary | power
 *     power   := primary ('^' unary)?
 *     primary := number | name | name '(' expr ')' | '(' expr ')'
 *
 * Names are coordinate variables declared by the caller, the constant `pi`,
 * or one of the functions sin, cos, exp, log, sqrt. Integer exponents are
 * expanded by repeated multiplication; other exponents go through pow and
 * need a positive base. `^` is right-associative and binds tighter than unary
 * minus on its left, so -x^2 is -(x^2).
 */

#include "engel/core/field.hpp"
#include "engel/core/jet.hpp"

#include <cctype>
#include <cstdio>
#include <cmath>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace engel {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : std::runtime_error(what + " at position " + std::to_string(position)), position_(position)
  {
  }
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

class Expression {
 public:
  enum class Op { Number, Var, Add, Sub, Mul, Div, Neg, Pow, Sin, Cos, Exp, Log, Sqrt };

  struct Node {
    Op op = Op::Number;
    double value = 0.0;
    int var = -1;
    int lhs = -1, rhs = -1;
  };

  static Expression parse(std::string_view source, std::vector<std::string> variables)
  {
    Expression e;
    e.source_ = std::string(source);
    e.variables_ = std::move(variables);
    Parser p{source, e};
    e.root_ = p.expr();
    p.skip();
    if (p.pos != source.size()) throw ParseError("unexpected '" + std::string(1, source[p.pos]) + "'", p.pos);
    return e;
  }

  const std::string& source() const { return source_; }
  const std::vector<std::string>& variables() const { return variables_; }
  int nvars() const { return static_cast<int>(variables_.size()); }
  const std::vector<Node>& nodes() const { return nodes_; }
  int root() const { return root_; }

  Jet eval(const JetTuple& x) const
  {
    if (static_cast<int>(x.size()) != nvars()) throw std::invalid_argument("Expression: wrong number of arguments");
    return eval_node(root_, x);
  }

  double eval(const Vec& x) const
  {
    JetTuple j;
    for (int i = 0; i < x.size(); ++i) j.push_back(Jet::constant(static_cast<int>(x.size()), 0, x[i]));
    return eval(j).value();
  }

 private:
  struct Parser {
    std::string_view s;
    Expression& e;
    std::size_t pos = 0;

    void skip()
    {
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    bool accept(char c)
    {
      skip();
      if (pos < s.size() && s[pos] == c) {
        ++pos;
        return true;
      }
      return false;
    }
    int add(Node n)
    {
      e.nodes_.push_back(n);
      return static_cast<int>(e.nodes_.size()) - 1;
    }
    int binary(Op op, int l, int r) { return add({op, 0.0, -1, l, r}); }

    int expr()
    {
      int l = term();
      for (;;) {
        if (accept('+')) l = binary(Op::Add, l, term());
        else if (accept('-')) l = binary(Op::Sub, l, term());
        else return l;
      }
    }
    int term()
    {
      int l = unary();
      for (;;) {
        if (accept('*')) l = binary(Op::Mul, l, unary());
        else if (accept('/')) l = binary(Op::Div, l, unary());
        else return l;
      }
    }
    int unary()
    {
      if (accept('-')) return add({Op::Neg, 0.0, -1, unary(), -1});
      if (accept('+')) return unary();
      return power();
    }
    int power()
    {
      const int base = primary();
      if (accept('^')) return binary(Op::Pow, base, unary());
      return base;
    }
    int primary()
    {
      skip();
      if (pos >= s.size()) throw ParseError("unexpected end of expression", pos);
      const char c = s[pos];
      if (accept('(')) {
        const int inner = expr();
        if (!accept(')')) throw ParseError("expected ')'", pos);
        return inner;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return name();
      throw ParseError("unexpected '" + std::string(1, c) + "'", pos);
    }
    int number()
    {
      const std::size_t start = pos;
      while (pos < s.size() && (std::isdigit(static_cast<unsigned char>(s[pos])) || s[pos] == '.')) ++pos;
      if (pos < s.size() && (s[pos] == 'e' || s[pos] == 'E')) {
        std::size_t p = pos + 1;
        if (p < s.size() && (s[p] == '+' || s[p] == '-')) ++p;
        if (p < s.size() && std::isdigit(static_cast<unsigned char>(s[p]))) {
          pos = p;
          while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
        }
      }
      const std::string text(s.substr(start, pos - start));
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(text, &used);
      } catch (const std::exception&) {
        throw ParseError("malformed number '" + text + "'", start);
      }
      if (used != text.size()) throw ParseError("malformed number '" + text + "'", start);
      return add({Op::Number, v});
    }
    int name()
    {
      const std::size_t start = pos;
      while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_')) ++pos;
      const std::string id(s.substr(start, pos - start));
      static const std::pair<const char*, Op> functions[] = {
          {"sin", Op::Sin}, {"cos", Op::Cos}, {"exp", Op::Exp}, {"log", Op::Log}, {"sqrt", Op::Sqrt}};
      for (const auto& [fname, op] : functions) {
        if (id == fname) {
          if (!accept('(')) throw ParseError("expected '(' after " + id, pos);
          const int arg = expr();
          if (!accept(')')) throw ParseError("expected ')'", pos);
          return add({op, 0.0, -1, arg, -1});
        }
      }
      for (std::size_t i = 0; i < e.variables_.size(); ++i)
        if (e.variables_[i] == id) return add({Op::Var, 0.0, static_cast<int>(i)});
      if (id == "pi") return add({Op::Number, std::numbers::pi});
      throw ParseError("unknown name '" + id + "'", start);
    }
  };

  Jet eval_node(int i, const JetTuple& x) const
  {
    const Node& n = nodes_[i];
    const int nv = static_cast<int>(x.size());
    const int ord = x.empty() ? 0 : x[0].order();
    switch (n.op) {
      case Op::Number: return Jet::constant(nv, ord, n.value);
      case Op::Var: return x[n.var];
      case Op::Add: return eval_node(n.lhs, x) + eval_node(n.rhs, x);
      case Op::Sub: return eval_node(n.lhs, x) - eval_node(n.rhs, x);
      case Op::Mul: return eval_node(n.lhs, x) * eval_node(n.rhs, x);
      case Op::Div: {
        const Jet d = eval_node(n.rhs, x);
        if (d.value() == 0.0) throw std::domain_error("Expression: division by zero in '" + source_ + "'");
        return eval_node(n.lhs, x) / d;
      }
      case Op::Neg: return -eval_node(n.lhs, x);
      case Op::Pow: {
        const Jet base = eval_node(n.lhs, x);
        const Jet ex = eval_node(n.rhs, x);
        const double p = ex.value();
        if ((ex - p).max_abs() == 0.0 && p == std::round(p) && std::abs(p) <= 64) {
          Jet r = Jet::constant(nv, ord, 1.0);
          for (int k = 0; k < std::abs(static_cast<int>(p)); ++k) r = r * base;
          return p < 0 ? reciprocal(r) : r;
        }
        if (!(base.value() > 0.0)) throw std::domain_error("Expression: non-integer power of a non-positive base in '" + source_ + "'");
        return exp(ex * log(base));
      }
      case Op::Sin: return sin(eval_node(n.lhs, x));
      case Op::Cos: return cos(eval_node(n.lhs, x));
      case Op::Exp: return exp(eval_node(n.lhs, x));
      case Op::Log: return log(eval_node(n.lhs, x));
      case Op::Sqrt: return sqrt(eval_node(n.lhs, x));
    }
    return Jet(nv, ord);
  }

  std::string source_;
  std::vector<std::string> variables_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

/// Field whose components are parsed expressions in the chart variables.
template <class Kind>
Field<Kind> parse_field(ChartId chart, const std::vector<std::string>& variables, const std::vector<std::string>& components)
{
  std::vector<Expression> exprs;
  for (const auto& c : components) exprs.push_back(Expression::parse(c, variables));
  return make_field<Kind>(std::move(chart), static_cast<int>(variables.size()), static_cast<int>(components.size()),
                          [exprs](const JetTuple& x) {
                            JetTuple r;
                            for (const auto& e : exprs) r.push_back(e.eval(x));
                            return r;
                          });
}

inline VectorField parse_vector_field(ChartId chart, const std::vector<std::string>& variables, const std::vector<std::string>& comps)
{
  if (comps.size() != variables.size()) throw ParseError("vector field needs one component per variable", 0);
  return parse_field<VectorKind>(std::move(chart), variables, comps);
}

inline OneForm parse_one_form(ChartId chart, const std::vector<std::string>& variables, const std::vector<std::string>& comps)
{
  return parse_field<CovectorKind>(std::move(chart), variables, comps);
}

inline ScalarField parse_scalar_field(ChartId chart, const std::vector<std::string>& variables, const std::string& expr)
{
  return parse_field<ScalarKind>(std::move(chart), variables, {expr});
}

/// Polynomial of a jet in the expression format, expanded around `center` (origin if empty).
inline std::string jet_to_expression(const Jet& j, const std::vector<std::string>& variables, const Vec& center = Vec())
{
  if (static_cast<int>(variables.size()) != j.nvars()) throw std::invalid_argument("jet_to_expression: variable count mismatch");
  const auto& exps = detail::table(j.nvars()).exps;
  std::string out;
  char buf[40];
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (j[i] == 0.0) continue;
    std::snprintf(buf, sizeof buf, "%.17g", std::abs(j[i]));
    out += out.empty() ? (j[i] < 0 ? "-" : "") : (j[i] < 0 ? " - " : " + ");
    out += buf;
    for (int v = 0; v < j.nvars(); ++v) {
      if (exps[i][v] == 0) continue;
      std::string base = variables[v];
      if (center.size() > 0 && center[v] != 0.0) {
        std::snprintf(buf, sizeof buf, "%.17g", center[v]);
        base = "(" + base + " - (" + buf + "))";
      }
      out += "*" + base;
      if (exps[i][v] > 1) out += "^" + std::to_string(exps[i][v]);
    }
  }
  return out.empty() ? "0" : out;
}

}  // namespace engel
