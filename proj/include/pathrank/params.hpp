#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "pathrank/array.hpp"

namespace pathrank {

// Named parameter set. std::map keeps iteration order stable across runs,
// which the deterministic-training guarantee relies on.
template <class S>
struct ParamStore {
  std::map<std::string, Arr<S>> params;

  Arr<S>& operator[](const std::string& name) { return params.at(name); }
  const Arr<S>& at(const std::string& name) const { return params.at(name); }
  bool has(const std::string& name) const { return params.count(name) > 0; }

  Arr<S>& add(const std::string& name, std::vector<int> shape) {
    if (params.count(name)) throw std::invalid_argument("duplicate parameter: " + name);
    return params.emplace(name, Arr<S>(std::move(shape))).first->second;
  }

  int64_t total_size() const {
    int64_t n = 0;
    for (const auto& [k, v] : params) n += v.size();
    return n;
  }
};

// truncated normal, sigma=0.02, resample outside 2 sigma (BERT convention)
template <class S>
inline void init_trunc_normal(Arr<S>& a, std::mt19937_64& rng, double sigma = 0.02) {
  std::normal_distribution<double> nd(0.0, sigma);
  for (auto& v : a.data) {
    double x;
    do {
      x = nd(rng);
    } while (std::abs(x) > 2.0 * sigma);
    v = static_cast<S>(x);
  }
}

// --- checkpoint: "PRNK", version, dtype tag, count, then per-parameter
//     {name_len u32, name, rank u32, dims u32..., little-endian payload} ----

namespace detail {
inline void put_u32(std::ostream& os, uint32_t v) {
  char b[4] = {char(v), char(v >> 8), char(v >> 16), char(v >> 24)};
  os.write(b, 4);
}
inline uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}
}  // namespace detail

template <class S>
inline void save_checkpoint(const ParamStore<S>& ps, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  os.write("PRNK", 4);
  detail::put_u32(os, 1u);                          // version
  detail::put_u32(os, sizeof(S) == 4 ? 32u : 64u);  // dtype tag
  detail::put_u32(os, static_cast<uint32_t>(ps.params.size()));
  for (const auto& [name, arr] : ps.params) {
    detail::put_u32(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put_u32(os, static_cast<uint32_t>(arr.shape.size()));
    for (int d : arr.shape) detail::put_u32(os, static_cast<uint32_t>(d));
    static_assert(std::endian::native == std::endian::little, "little-endian host expected");
    os.write(reinterpret_cast<const char*>(arr.data.data()),
             static_cast<std::streamsize>(arr.data.size() * sizeof(S)));
  }
  if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

template <class S>
inline ParamStore<S> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[4];
  is.read(magic, 4);
  if (std::strncmp(magic, "PRNK", 4) != 0) throw std::runtime_error("bad checkpoint magic: " + path);
  uint32_t version = detail::get_u32(is);
  if (version != 1) throw std::runtime_error("unsupported checkpoint version");
  uint32_t dtype = detail::get_u32(is);
  if (dtype != (sizeof(S) == 4 ? 32u : 64u)) throw std::runtime_error("checkpoint dtype mismatch");
  uint32_t count = detail::get_u32(is);
  ParamStore<S> ps;
  for (uint32_t i = 0; i < count; ++i) {
    uint32_t nlen = detail::get_u32(is);
    std::string name(nlen, '\0');
    is.read(name.data(), nlen);
    uint32_t rank = detail::get_u32(is);
    std::vector<int> shape(rank);
    for (auto& d : shape) d = static_cast<int>(detail::get_u32(is));
    Arr<S> arr(shape);
    is.read(reinterpret_cast<char*>(arr.data.data()),
            static_cast<std::streamsize>(arr.data.size() * sizeof(S)));
    ps.params.emplace(std::move(name), std::move(arr));
  }
  if (!is) throw std::runtime_error("truncated checkpoint: " + path);
  return ps;
}

// --- Adam with linear warmup then linear decay ----------------------------

template <class S>
class AdamOptimizer {
 public:
  AdamOptimizer(double lr, int64_t total_steps, double warmup_frac = 0.1, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8)
      : base_lr_(lr), total_steps_(total_steps), warmup_steps_(std::max<int64_t>(
            1, static_cast<int64_t>(warmup_frac * static_cast<double>(total_steps)))),
        beta1_(beta1), beta2_(beta2), eps_(eps) {}

  double current_lr() const {
    int64_t t = step_ + 1;
    if (t <= warmup_steps_) return base_lr_ * static_cast<double>(t) / static_cast<double>(warmup_steps_);
    double rem = static_cast<double>(total_steps_ - t) /
                 static_cast<double>(std::max<int64_t>(1, total_steps_ - warmup_steps_));
    return base_lr_ * std::max(0.0, rem);
  }

  void step(ParamStore<S>& ps, const std::map<std::string, Arr<S>>& grads) {
    const double lr = current_lr();
    ++step_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
    for (auto& [name, p] : ps.params) {
      auto it = grads.find(name);
      if (it == grads.end()) continue;
      const Arr<S>& g = it->second;
      auto& m = m_.try_emplace(name, std::vector<double>(p.data.size(), 0.0)).first->second;
      auto& v = v_.try_emplace(name, std::vector<double>(p.data.size(), 0.0)).first->second;
      for (size_t i = 0; i < p.data.size(); ++i) {
        double gi = static_cast<double>(g.data[i]);
        m[i] = beta1_ * m[i] + (1.0 - beta1_) * gi;
        v[i] = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
        double mh = m[i] / bc1, vh = v[i] / bc2;
        p.data[i] -= static_cast<S>(lr * mh / (std::sqrt(vh) + eps_));
      }
    }
  }

  int64_t steps_taken() const { return step_; }

 private:
  double base_lr_;
  int64_t total_steps_, warmup_steps_;
  double beta1_, beta2_, eps_;
  int64_t step_ = 0;
  std::map<std::string, std::vector<double>> m_, v_;
};

}  // namespace pathrank
