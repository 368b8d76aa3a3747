#include "mconv/expression.hpp"

#include <cctype>
#include <cmath>
#include <vector>

#include "mconv/types.hpp"

namespace mconv {

// AST: constants, variable references, unary/binary operators, calls.
struct Expression::Node {
  enum class Kind { constant, variable, unary, binary, call } kind;
  double value = 0;                       // constant
  int var = 0;                            // 0=x 1=z 2=t
  char op = 0;                            // + - * / ^ (binary), - (unary)
  double (*fn1)(double) = nullptr;        // single-argument call
  double (*fn2)(double, double) = nullptr;
  std::shared_ptr<const Node> a, b;

  double eval(double x, double z, double t) const {
    switch (kind) {
      case Kind::constant: return value;
      case Kind::variable: return var == 0 ? x : var == 1 ? z : t;
      case Kind::unary: return -a->eval(x, z, t);
      case Kind::binary: {
        const double u = a->eval(x, z, t), v = b->eval(x, z, t);
        switch (op) {
          case '+': return u + v;
          case '-': return u - v;
          case '*': return u * v;
          case '/': return u / v;
          case '^': return std::pow(u, v);
        }
        MC_ASSERT(false, "bad operator");
      }
      case Kind::call: return fn1 ? fn1(a->eval(x, z, t))
                                  : fn2(a->eval(x, z, t), b->eval(x, z, t));
    }
    MC_ASSERT(false, "bad node kind");
  }
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Node = Expression::Node;

NodePtr make_const(double v) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::constant;
  n->value = v;
  return n;
}

// Recursive-descent parser over the expression text.
class Parser {
 public:
  explicit Parser(const std::string& s) : s_(s) {}

  NodePtr parse() {
    NodePtr e = sum();
    skip_ws();
    require(pos_ == s_.size(), "expression: trailing characters at '" +
                                   s_.substr(pos_) + "'");
    return e;
  }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos_ < s_.size() ? s_[pos_] : '\0';
  }

  NodePtr sum() {
    NodePtr left = product();
    for (;;) {
      if (eat('+')) left = binary('+', left, product());
      else if (eat('-')) left = binary('-', left, product());
      else return left;
    }
  }

  NodePtr product() {
    NodePtr left = power();
    for (;;) {
      if (eat('*')) left = binary('*', left, power());
      else if (eat('/')) left = binary('/', left, power());
      else return left;
    }
  }

  NodePtr power() {  // right-associative
    NodePtr base = unary();
    if (eat('^')) return binary('^', base, power());
    return base;
  }

  NodePtr unary() {
    if (eat('-')) {
      auto n = std::make_shared<Node>();
      n->kind = Node::Kind::unary;
      n->a = unary();
      return n;
    }
    (void)eat('+');
    return atom();
  }

  NodePtr binary(char op, NodePtr a, NodePtr b) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::binary;
    n->op = op;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
  }

  NodePtr atom() {
    skip_ws();
    require(pos_ < s_.size(), "expression: unexpected end of input");
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return name();
    if (eat('(')) {
      NodePtr e = sum();
      require(eat(')'), "expression: missing ')'");
      return e;
    }
    fail("expression: unexpected character '" + std::string(1, c) + "'");
  }

  NodePtr number() {
    std::size_t used = 0;
    double v;
    try {
      v = std::stod(s_.substr(pos_), &used);
    } catch (const std::exception&) {
      fail("expression: bad number at '" + s_.substr(pos_) + "'");
    }
    pos_ += used;
    return make_const(v);
  }

  NodePtr name() {
    std::size_t end = pos_;
    while (end < s_.size() &&
           (std::isalnum(static_cast<unsigned char>(s_[end])) || s_[end] == '_'))
      ++end;
    const std::string id = s_.substr(pos_, end - pos_);
    pos_ = end;

    if (id == "pi") return make_const(M_PI);
    if (id == "x" || id == "z" || id == "t") {
      auto n = std::make_shared<Node>();
      n->kind = Node::Kind::variable;
      n->var = id == "x" ? 0 : id == "z" ? 1 : 2;
      return n;
    }

    static const struct { const char* name; double (*fn)(double); } fns1[] = {
        {"sin", std::sin},   {"cos", std::cos},   {"tan", std::tan},
        {"exp", std::exp},   {"log", std::log},   {"sqrt", std::sqrt},
        {"abs", std::fabs},  {"tanh", std::tanh}, {"atan", std::atan},
        {"sinh", std::sinh}, {"cosh", std::cosh},
    };
    static const struct { const char* name; double (*fn)(double, double); } fns2[] = {
        {"min", [](double a, double b) { return a < b ? a : b; }},
        {"max", [](double a, double b) { return a > b ? a : b; }},
        {"pow", static_cast<double (*)(double, double)>(std::pow)},
        {"atan2", static_cast<double (*)(double, double)>(std::atan2)},
    };

    require(eat('('), "expression: unknown name '" + id + "'");
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::call;
    n->a = sum();
    for (const auto& f : fns1)
      if (id == f.name) {
        n->fn1 = f.fn;
        require(eat(')'), "expression: missing ')' after " + id);
        return n;
      }
    for (const auto& f : fns2)
      if (id == f.name) {
        n->fn2 = f.fn;
        require(eat(','), "expression: '" + id + "' takes two arguments");
        n->b = sum();
        require(eat(')'), "expression: missing ')' after " + id);
        return n;
      }
    fail("expression: unknown function '" + id + "'");
  }
};

}  // namespace

Expression::Expression(const std::string& text) : text_(text) {
  root_ = Parser(text).parse();
}

double Expression::operator()(double x, double z, double t) const {
  return root_ ? root_->eval(x, z, t) : 0.0;
}

}  // namespace mconv
