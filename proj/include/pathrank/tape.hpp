#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <vector>

#include "pathrank/array.hpp"

namespace pathrank {

// Reverse-mode tape over Arr<S>. Nodes are appended in topological order;
// backward() walks them once in reverse. The tape owns every intermediate
// value; parameter leaves accumulate gradients that the trainer reads back.
template <class S>
class Tape {
 public:
  using Ref = int32_t;

  struct Node {
    Arr<S> value;
    Arr<S> grad;
    std::function<void()> backward;  // empty for leaves
    bool requires_grad = false;
  };

  Ref leaf(Arr<S> v, bool requires_grad = false) {
    Node n;
    n.value = std::move(v);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return static_cast<Ref>(nodes_.size() - 1);
  }

  const Arr<S>& val(Ref r) const { return nodes_[r].value; }
  const Arr<S>& grad(Ref r) const { return nodes_[r].grad; }
  size_t size() const { return nodes_.size(); }

  // --- basic algebra -------------------------------------------------------

  Ref matmul(Ref a, Ref b) {
    const Arr<S>&A = val(a), &B = val(b);
    if (A.rank() != 2 || B.rank() != 2 || A.cols() != B.rows()) shape_error("matmul", A, B);
    Arr<S> out({A.rows(), B.cols()});
    gemm(A, B, out, false, false);
    return record(std::move(out), {a, b}, [this, a, b](Node& n) {
      // dA = dY.B^T ; dB = A^T.dY
      gemm_acc(n.grad, val(b), nodes_[a].grad, false, true);
      gemm_acc(val(a), n.grad, nodes_[b].grad, true, false);
    });
  }

  // a . b^T  (saves an explicit transpose in attention)
  Ref matmul_nt(Ref a, Ref b) {
    const Arr<S>&A = val(a), &B = val(b);
    if (A.rank() != 2 || B.rank() != 2 || A.cols() != B.cols()) shape_error("matmul_nt", A, B);
    Arr<S> out({A.rows(), B.rows()});
    gemm(A, B, out, false, true, true);
    return record(std::move(out), {a, b}, [this, a, b](Node& n) {
      gemm_acc(n.grad, val(b), nodes_[a].grad, false, false);
      gemm_acc(n.grad, val(a), nodes_[b].grad, true, false);
    });
  }

  Ref add(Ref a, Ref b) {
    const Arr<S>&A = val(a), &B = val(b);
    if (!A.same_shape(B)) shape_error("add", A, B);
    Arr<S> out = A;
    for (int64_t i = 0; i < out.size(); ++i) out.data[i] += B.data[i];
    return record(std::move(out), {a, b}, [this, a, b](Node& n) {
      axpy(S(1), n.grad, nodes_[a].grad);
      axpy(S(1), n.grad, nodes_[b].grad);
    });
  }

  Ref sub(Ref a, Ref b) {
    const Arr<S>&A = val(a), &B = val(b);
    if (!A.same_shape(B)) shape_error("sub", A, B);
    Arr<S> out = A;
    for (int64_t i = 0; i < out.size(); ++i) out.data[i] -= B.data[i];
    return record(std::move(out), {a, b}, [this, a, b](Node& n) {
      axpy(S(1), n.grad, nodes_[a].grad);
      axpy(S(-1), n.grad, nodes_[b].grad);
    });
  }

  // [m x n] + [n] broadcast over rows (the only broadcast supported)
  Ref add_bias_rows(Ref a, Ref bias) {
    const Arr<S>&A = val(a), &B = val(bias);
    if (A.rank() != 2 || B.rank() != 1 || A.cols() != B.shape[0]) shape_error("add_bias_rows", A, B);
    Arr<S> out = A;
    for (int r = 0; r < A.rows(); ++r)
      for (int c = 0; c < A.cols(); ++c) out.at(r, c) += B.at(c);
    return record(std::move(out), {a, bias}, [this, a, bias](Node& n) {
      axpy(S(1), n.grad, nodes_[a].grad);
      Arr<S>& gb = nodes_[bias].grad;
      const Arr<S>& g = n.grad;
      for (int r = 0; r < g.rows(); ++r)
        for (int c = 0; c < g.cols(); ++c) gb.at(c) += g.at(r, c);
    });
  }

  Ref mul(Ref a, Ref b) {
    const Arr<S>&A = val(a), &B = val(b);
    if (!A.same_shape(B)) shape_error("mul", A, B);
    Arr<S> out = A;
    for (int64_t i = 0; i < out.size(); ++i) out.data[i] *= B.data[i];
    return record(std::move(out), {a, b}, [this, a, b](Node& n) {
      const Arr<S>&A2 = val(a), &B2 = val(b);
      for (int64_t i = 0; i < n.grad.size(); ++i) {
        nodes_[a].grad.data[i] += n.grad.data[i] * B2.data[i];
        nodes_[b].grad.data[i] += n.grad.data[i] * A2.data[i];
      }
    });
  }

  Ref scale(Ref a, S c) {
    Arr<S> out = val(a);
    for (auto& v : out.data) v *= c;
    return record(std::move(out), {a}, [this, a, c](Node& n) { axpy(c, n.grad, nodes_[a].grad); });
  }

  // --- nonlinearities ------------------------------------------------------

  // softmax along the last axis (rank 1 or 2), max-subtracted
  Ref softmax(Ref x) {
    const Arr<S>& X = val(x);
    if (X.rank() > 2) throw std::invalid_argument("softmax: rank > 2");
    Arr<S> out = X;
    const int ncols = X.rank() == 2 ? X.cols() : static_cast<int>(X.size());
    const int nrows = static_cast<int>(X.size()) / ncols;
    for (int r = 0; r < nrows; ++r) {
      S* p = out.data.data() + static_cast<size_t>(r) * ncols;
      S mx = *std::max_element(p, p + ncols);
      S sum = S(0);
      for (int c = 0; c < ncols; ++c) {
        p[c] = std::exp(p[c] - mx);
        sum += p[c];
      }
      for (int c = 0; c < ncols; ++c) p[c] /= sum;
    }
    return record(std::move(out), {x}, [this, x, nrows, ncols](Node& n) {
      for (int r = 0; r < nrows; ++r) {
        const S* y = n.value.data.data() + static_cast<size_t>(r) * ncols;
        const S* gy = n.grad.data.data() + static_cast<size_t>(r) * ncols;
        S* gx = nodes_[x].grad.data.data() + static_cast<size_t>(r) * ncols;
        S dot = S(0);
        for (int c = 0; c < ncols; ++c) dot += gy[c] * y[c];
        for (int c = 0; c < ncols; ++c) gx[c] += y[c] * (gy[c] - dot);
      }
    });
  }

  // -log p[index]; p must already be a distribution (typically softmax output)
  Ref cross_entropy(Ref p, int index) {
    const Arr<S>& P = val(p);
    if (index < 0 || index >= P.size())
      throw std::out_of_range("cross_entropy: index " + std::to_string(index) + " out of range");
    Arr<S> out({1});
    const S eps = std::numeric_limits<S>::min();
    out.at(0) = -std::log(std::max(P.at(index), eps));
    return record(std::move(out), {p}, [this, p, index, eps](Node& n) {
      nodes_[p].grad.at(index) += -n.grad.at(0) / std::max(val(p).at(index), eps);
    });
  }

  // binary cross-entropy on a logit, label in {0,1}; softplus form
  Ref bce_with_logit(Ref logit, int label) {
    const S z = val(logit).at(0);
    Arr<S> out({1});
    // log(1+e^z) - label*z, computed stably
    out.at(0) = std::max(z, S(0)) + std::log1p(std::exp(-std::abs(z))) - S(label) * z;
    return record(std::move(out), {logit}, [this, logit, z, label](Node& n) {
      S sig = S(1) / (S(1) + std::exp(-z));
      nodes_[logit].grad.at(0) += n.grad.at(0) * (sig - S(label));
    });
  }

  // row-wise layernorm with affine (gamma, beta over columns)
  Ref layernorm(Ref x, Ref gamma, Ref beta, S eps = S(1e-5)) {
    const Arr<S>& X = val(x);
    if (X.rank() != 2) throw std::invalid_argument("layernorm: rank != 2");
    const int R = X.rows(), C = X.cols();
    if (val(gamma).size() != C || val(beta).size() != C) shape_error("layernorm", X, val(gamma));
    Arr<S> out({R, C});
    Arr<S> xhat({R, C});
    std::vector<S> rstd(static_cast<size_t>(R));
    for (int r = 0; r < R; ++r) {
      S mean = S(0), var = S(0);
      for (int c = 0; c < C; ++c) mean += X.at(r, c);
      mean /= S(C);
      for (int c = 0; c < C; ++c) {
        S d = X.at(r, c) - mean;
        var += d * d;
      }
      var /= S(C);
      S rs = S(1) / std::sqrt(var + eps);
      rstd[static_cast<size_t>(r)] = rs;
      for (int c = 0; c < C; ++c) {
        S h = (X.at(r, c) - mean) * rs;
        xhat.at(r, c) = h;
        out.at(r, c) = h * val(gamma).at(c) + val(beta).at(c);
      }
    }
    auto xh = std::make_shared<Arr<S>>(std::move(xhat));
    auto rs = std::make_shared<std::vector<S>>(std::move(rstd));
    return record(std::move(out), {x, gamma, beta}, [this, x, gamma, beta, xh, rs, R, C](Node& n) {
      for (int r = 0; r < R; ++r) {
        S sum_g = S(0), sum_gh = S(0);
        for (int c = 0; c < C; ++c) {
          S gy = n.grad.at(r, c);
          nodes_[gamma].grad.at(c) += gy * xh->at(r, c);
          nodes_[beta].grad.at(c) += gy;
          S g = gy * val(gamma).at(c);
          sum_g += g;
          sum_gh += g * xh->at(r, c);
        }
        for (int c = 0; c < C; ++c) {
          S g = n.grad.at(r, c) * val(gamma).at(c);
          nodes_[x].grad.at(r, c) +=
              (*rs)[static_cast<size_t>(r)] * (g - (sum_g + xh->at(r, c) * sum_gh) / S(C));
        }
      }
    });
  }

  // tanh-approximation GELU (BERT convention)
  Ref gelu(Ref x) {
    const S k = S(0.7978845608028654);  // sqrt(2/pi)
    Arr<S> out = val(x);
    for (auto& v : out.data) {
      S u = k * (v + S(0.044715) * v * v * v);
      v = S(0.5) * v * (S(1) + std::tanh(u));
    }
    return record(std::move(out), {x}, [this, x, k](Node& n) {
      const Arr<S>& X = val(x);
      for (int64_t i = 0; i < X.size(); ++i) {
        S v = X.data[i];
        S u = k * (v + S(0.044715) * v * v * v);
        S t = std::tanh(u);
        S du = k * (S(1) + S(3) * S(0.044715) * v * v);
        S d = S(0.5) * (S(1) + t) + S(0.5) * v * (S(1) - t * t) * du;
        nodes_[x].grad.data[i] += n.grad.data[i] * d;
      }
    });
  }

  // gather rows of a [V x H] table
  Ref embedding_lookup(Ref table, std::vector<int> ids) {
    const Arr<S>& T = val(table);
    if (T.rank() != 2) throw std::invalid_argument("embedding_lookup: table rank != 2");
    const int H = T.cols();
    Arr<S> out({static_cast<int>(ids.size()), H});
    for (size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0 || ids[i] >= T.rows()) throw std::out_of_range("embedding_lookup: id");
      for (int c = 0; c < H; ++c) out.at(static_cast<int>(i), c) = T.at(ids[i], c);
    }
    auto idv = std::make_shared<std::vector<int>>(std::move(ids));
    return record(std::move(out), {table}, [this, table, idv, H](Node& n) {
      for (size_t i = 0; i < idv->size(); ++i)
        for (int c = 0; c < H; ++c)
          nodes_[table].grad.at((*idv)[i], c) += n.grad.at(static_cast<int>(i), c);
    });
  }

  // --- structural ops ------------------------------------------------------

  Ref concat_rows(const std::vector<Ref>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
    const int C = val(parts[0]).cols();
    int R = 0;
    for (Ref p : parts) {
      if (val(p).rank() != 2 || val(p).cols() != C) shape_error("concat_rows", val(parts[0]), val(p));
      R += val(p).rows();
    }
    Arr<S> out({R, C});
    int off = 0;
    for (Ref p : parts) {
      std::copy(val(p).data.begin(), val(p).data.end(),
                out.data.begin() + static_cast<size_t>(off) * C);
      off += val(p).rows();
    }
    auto pv = std::make_shared<std::vector<Ref>>(parts);
    return record(std::move(out), parts, [this, pv, C](Node& n) {
      int o = 0;
      for (Ref p : *pv) {
        const int pr = val(p).rows();
        for (int r = 0; r < pr; ++r)
          for (int c = 0; c < C; ++c) nodes_[p].grad.at(r, c) += n.grad.at(o + r, c);
        o += pr;
      }
    });
  }

  Ref slice_rows(Ref a, int begin, int end) {
    const Arr<S>& A = val(a);
    if (A.rank() != 2 || begin < 0 || end > A.rows() || begin >= end)
      throw std::invalid_argument("slice_rows: bad range");
    const int C = A.cols();
    Arr<S> out({end - begin, C});
    std::copy(A.data.begin() + static_cast<size_t>(begin) * C,
              A.data.begin() + static_cast<size_t>(end) * C, out.data.begin());
    return record(std::move(out), {a}, [this, a, begin, C](Node& n) {
      for (int r = 0; r < n.grad.rows(); ++r)
        for (int c = 0; c < C; ++c) nodes_[a].grad.at(begin + r, c) += n.grad.at(r, c);
    });
  }

  Ref slice_cols(Ref a, int begin, int end) {
    const Arr<S>& A = val(a);
    if (A.rank() != 2 || begin < 0 || end > A.cols() || begin >= end)
      throw std::invalid_argument("slice_cols: bad range");
    Arr<S> out({A.rows(), end - begin});
    for (int r = 0; r < A.rows(); ++r)
      for (int c = begin; c < end; ++c) out.at(r, c - begin) = A.at(r, c);
    return record(std::move(out), {a}, [this, a, begin](Node& n) {
      for (int r = 0; r < n.grad.rows(); ++r)
        for (int c = 0; c < n.grad.cols(); ++c) nodes_[a].grad.at(r, begin + c) += n.grad.at(r, c);
    });
  }

  Ref concat_cols(const std::vector<Ref>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
    const int R = val(parts[0]).rows();
    int C = 0;
    for (Ref p : parts) {
      if (val(p).rank() != 2 || val(p).rows() != R) shape_error("concat_cols", val(parts[0]), val(p));
      C += val(p).cols();
    }
    Arr<S> out({R, C});
    int off = 0;
    for (Ref p : parts) {
      for (int r = 0; r < R; ++r)
        for (int c = 0; c < val(p).cols(); ++c) out.at(r, off + c) = val(p).at(r, c);
      off += val(p).cols();
    }
    auto pv = std::make_shared<std::vector<Ref>>(parts);
    return record(std::move(out), parts, [this, pv, R](Node& n) {
      int o = 0;
      for (Ref p : *pv) {
        for (int r = 0; r < R; ++r)
          for (int c = 0; c < val(p).cols(); ++c) nodes_[p].grad.at(r, c) += n.grad.at(r, o + c);
        o += val(p).cols();
      }
    });
  }

  Ref sum_all(Ref a) {
    Arr<S> out({1});
    out.at(0) = std::accumulate(val(a).data.begin(), val(a).data.end(), S(0));
    return record(std::move(out), {a}, [this, a](Node& n) {
      for (auto& g : nodes_[a].grad.data) g += n.grad.at(0);
    });
  }

  // inverted dropout; rate 0 is the identity and records no noise
  Ref dropout(Ref a, double rate, std::mt19937_64& rng) {
    if (rate <= 0.0) return a;
    std::bernoulli_distribution keep(1.0 - rate);
    auto mask = std::make_shared<std::vector<S>>(val(a).data.size());
    Arr<S> out = val(a);
    const S inv = S(1.0 / (1.0 - rate));
    for (size_t i = 0; i < out.data.size(); ++i) {
      (*mask)[i] = keep(rng) ? inv : S(0);
      out.data[i] *= (*mask)[i];
    }
    return record(std::move(out), {a}, [this, a, mask](Node& n) {
      for (size_t i = 0; i < mask->size(); ++i) nodes_[a].grad.data[i] += n.grad.data[i] * (*mask)[i];
    });
  }

  // --- backward ------------------------------------------------------------

  // seed defaults to 1; callers composing losses across tapes (e.g. a softmax
  // over scores from separate forwards) pass the upstream gradient instead
  void backward(Ref loss, S seed = S(1)) {
    if (val(loss).size() != 1) throw std::invalid_argument("backward: loss is not scalar");
    for (auto& n : nodes_)
      if (n.grad.data.empty()) n.grad = Arr<S>(n.value.shape);
    nodes_[loss].grad.at(0) = seed;
    for (Ref i = static_cast<Ref>(nodes_.size()) - 1; i >= 0; --i)
      if (nodes_[i].backward) nodes_[i].backward();
  }

 private:
  std::vector<Node> nodes_;

  Ref record(Arr<S> out, const std::vector<Ref>& inputs, std::function<void(Node&)> bw) {
    bool rg = false;
    for (Ref i : inputs) rg = rg || nodes_[i].requires_grad || nodes_[i].backward != nullptr;
    Node n;
    n.value = std::move(out);
    n.requires_grad = rg;
    nodes_.push_back(std::move(n));
    Ref id = static_cast<Ref>(nodes_.size() - 1);
    if (rg) nodes_[id].backward = [this, id, bw = std::move(bw)]() { bw(nodes_[id]); };
    return id;
  }

  static void axpy(S a, const Arr<S>& x, Arr<S>& y) {
    for (int64_t i = 0; i < x.size(); ++i) y.data[i] += a * x.data[i];
  }

  // C (+)= op(A) . op(B); ikj loop order
  static void gemm(const Arr<S>& A, const Arr<S>& B, Arr<S>& C, bool ta, bool tb,
                   bool overwrite = true) {
    if (overwrite) std::fill(C.data.begin(), C.data.end(), S(0));
    gemm_acc(A, B, C, ta, tb);
  }

  static void gemm_acc(const Arr<S>& A, const Arr<S>& B, Arr<S>& C, bool ta, bool tb) {
    const int M = C.rows(), N = C.cols();
    const int K = ta ? A.rows() : A.cols();
    if (!ta && !tb) {
      for (int i = 0; i < M; ++i) {
        const S* arow = A.data.data() + static_cast<size_t>(i) * K;
        S* crow = C.data.data() + static_cast<size_t>(i) * N;
        for (int k = 0; k < K; ++k) {
          const S av = arow[k];
          if (av == S(0)) continue;
          const S* brow = B.data.data() + static_cast<size_t>(k) * N;
          for (int j = 0; j < N; ++j) crow[j] += av * brow[j];
        }
      }
    } else if (!ta && tb) {
      // C[i,j] += sum_k A[i,k] B[j,k]
      for (int i = 0; i < M; ++i) {
        const S* arow = A.data.data() + static_cast<size_t>(i) * K;
        S* crow = C.data.data() + static_cast<size_t>(i) * N;
        for (int j = 0; j < N; ++j) {
          const S* brow = B.data.data() + static_cast<size_t>(j) * K;
          S acc = S(0);
          for (int k = 0; k < K; ++k) acc += arow[k] * brow[k];
          crow[j] += acc;
        }
      }
    } else if (ta && !tb) {
      // C[i,j] += sum_k A[k,i] B[k,j]
      for (int k = 0; k < K; ++k) {
        const S* arow = A.data.data() + static_cast<size_t>(k) * M;
        const S* brow = B.data.data() + static_cast<size_t>(k) * N;
        for (int i = 0; i < M; ++i) {
          const S av = arow[i];
          if (av == S(0)) continue;
          S* crow = C.data.data() + static_cast<size_t>(i) * N;
          for (int j = 0; j < N; ++j) crow[j] += av * brow[j];
        }
      }
    } else {
      throw std::invalid_argument("gemm: ta && tb unsupported");
    }
  }
};

using TapeF = Tape<Real>;

}  // namespace pathrank
