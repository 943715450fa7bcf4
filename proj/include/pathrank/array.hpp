#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pathrank {

#ifdef PATHRANK_F64
using Real = double;
#else
using Real = float;
#endif

// Dense rank-<=3 array, row-major.
template <class S>
struct Arr {
  std::vector<int> shape;
  std::vector<S> data;

  Arr() = default;
  explicit Arr(std::vector<int> sh, S fill = S(0)) : shape(std::move(sh)) {
    data.assign(static_cast<size_t>(numel(shape)), fill);
  }
  Arr(std::vector<int> sh, std::vector<S> d) : shape(std::move(sh)), data(std::move(d)) {
    if (data.size() != static_cast<size_t>(numel(shape)))
      throw std::invalid_argument("Arr: data size does not match shape");
  }

  static int64_t numel(const std::vector<int>& sh) {
    int64_t n = 1;
    for (int d : sh) n *= d;
    return n;
  }

  int64_t size() const { return static_cast<int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int rows() const { return shape.at(0); }
  int cols() const { return shape.at(1); }

  S& at(int i) { return data[static_cast<size_t>(i)]; }
  S at(int i) const { return data[static_cast<size_t>(i)]; }
  S& at(int r, int c) { return data[static_cast<size_t>(r) * cols() + c]; }
  S at(int r, int c) const { return data[static_cast<size_t>(r) * cols() + c]; }

  bool same_shape(const Arr& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (S v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << "]";
    return os.str();
  }
};

template <class S>
[[noreturn]] inline void shape_error(const std::string& op, const Arr<S>& a, const Arr<S>& b) {
  throw std::invalid_argument(op + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

using ArrF = Arr<Real>;

}  // namespace pathrank
