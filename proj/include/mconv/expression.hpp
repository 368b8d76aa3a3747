#pragma once

#include <memory>
#include <string>

namespace mconv {

// Arithmetic expressions used for initial/boundary fields in config files.
// Grammar: numbers, + - * / ^, parentheses, function calls, and the
// variables
//   x : horizontal coordinate
//   z : depth below the top of the domain
//   t : time
// plus the constant pi. Parsed once into an AST and evaluated many times.
class Expression {
public:
  Expression() = default;                       // constant zero
  explicit Expression(const std::string& text); // throws Error on bad syntax

  double operator()(double x, double z, double t = 0.0) const;

  bool empty() const { return !root_; }
  const std::string& text() const { return text_; }

  struct Node;

private:
  std::string text_;
  std::shared_ptr<const Node> root_;
};

}  // namespace mconv
