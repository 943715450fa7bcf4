#pragma once

// Central finite-difference gradient oracle, independent of the tape's
// backward pass: rebuilds the forward computation at perturbed inputs.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "pathrank/tape.hpp"

namespace gradcheck {

template <class S>
using Builder = std::function<typename pathrank::Tape<S>::Ref(
    pathrank::Tape<S>&, const std::vector<typename pathrank::Tape<S>::Ref>&)>;

template <class S>
double eval(const Builder<S>& build, const std::vector<pathrank::Arr<S>>& inputs) {
  pathrank::Tape<S> t;
  std::vector<typename pathrank::Tape<S>::Ref> refs;
  for (const auto& a : inputs) refs.push_back(t.leaf(a, true));
  return static_cast<double>(t.val(build(t, refs)).at(0));
}

// max relative error between analytic gradients and central differences
template <class S>
double max_rel_err(const Builder<S>& build, std::vector<pathrank::Arr<S>> inputs,
                   double eps = sizeof(S) == 8 ? 1e-5 : 1e-3) {
  pathrank::Tape<S> t;
  std::vector<typename pathrank::Tape<S>::Ref> refs;
  for (const auto& a : inputs) refs.push_back(t.leaf(a, true));
  auto loss = build(t, refs);
  t.backward(loss);
  std::vector<pathrank::Arr<S>> analytic;
  for (auto r : refs) analytic.push_back(t.grad(r));

  double worst = 0.0;
  for (size_t i = 0; i < inputs.size(); ++i) {
    for (int64_t j = 0; j < inputs[i].size(); ++j) {
      S orig = inputs[i].data[j];
      inputs[i].data[j] = orig + static_cast<S>(eps);
      double fp = eval(build, inputs);
      inputs[i].data[j] = orig - static_cast<S>(eps);
      double fm = eval(build, inputs);
      inputs[i].data[j] = orig;
      double numeric = (fp - fm) / (2.0 * eps);
      double a = static_cast<double>(analytic[i].data[j]);
      double denom = std::max({std::abs(a), std::abs(numeric), 0.01});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

template <class S>
pathrank::Arr<S> random_arr(std::vector<int> shape, std::mt19937_64& rng, double scale = 1.0) {
  pathrank::Arr<S> a(std::move(shape));
  std::normal_distribution<double> nd(0.0, scale);
  for (auto& v : a.data) v = static_cast<S>(nd(rng));
  return a;
}

}  // namespace gradcheck
