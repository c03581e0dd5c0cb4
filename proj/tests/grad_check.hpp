#pragma once

// Central finite-difference gradient checking shared by the test suites.

#include <functional>
#include <string>
#include <vector>

#include "minotaur/ad.hpp"

namespace gradcheck {

using minotaur::ad::Matrix;
using minotaur::ad::Var;

// Builds a scalar graph from leaf inputs; returns the root.
using GraphFn = std::function<Var(const std::vector<Var>&)>;

struct Failure {
  int input, row, col;
  double analytic, numeric;
};

// Compares backward() gradients of every input entry against central finite
// differences. Returns failures exceeding |a-b| <= rel_tol*max(|a|,|b|) + abs_tol.
inline std::vector<Failure> check(const GraphFn& fn, std::vector<Matrix> inputs,
                                  double step = 1e-4, double rel_tol = 1e-3,
                                  double abs_tol = 1e-6) {
  std::vector<Var> leaves;
  leaves.reserve(inputs.size());
  for (const auto& m : inputs) leaves.push_back(minotaur::ad::leaf(m));
  Var root = fn(leaves);
  minotaur::ad::backward(root);

  std::vector<Failure> failures;
  for (size_t k = 0; k < inputs.size(); ++k) {
    Matrix analytic = leaves[k].node->grad;
    if (analytic.size() == 0) analytic = Matrix::Zero(inputs[k].rows(), inputs[k].cols());
    for (Eigen::Index i = 0; i < inputs[k].rows(); ++i)
      for (Eigen::Index j = 0; j < inputs[k].cols(); ++j) {
        auto eval_at = [&](double v) {
          std::vector<Var> shifted;
          shifted.reserve(inputs.size());
          for (size_t m = 0; m < inputs.size(); ++m) {
            Matrix mm = inputs[m];
            if (m == k) mm(i, j) = v;
            shifted.push_back(minotaur::ad::constant(mm));
          }
          return fn(shifted).scalar();
        };
        double base = inputs[k](i, j);
        double numeric = (eval_at(base + step) - eval_at(base - step)) / (2 * step);
        double a = analytic(i, j);
        if (std::abs(a - numeric) >
            rel_tol * std::max(std::abs(a), std::abs(numeric)) + abs_tol)
          failures.push_back({static_cast<int>(k), static_cast<int>(i),
                              static_cast<int>(j), a, numeric});
      }
  }
  return failures;
}

}  // namespace gradcheck
