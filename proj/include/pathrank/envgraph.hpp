#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <random>
#include <stdexcept>
#include <vector>

#include "pathrank/vocab.hpp"

namespace pathrank {

constexpr double kPi = 3.14159265358979323846;
constexpr double kSuccessRadiusM = 3.0;  // success iff geodesic < 3m, strict

inline double wrap_pi(double a) {  // wrap to (-pi, pi]
  a = std::fmod(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}
inline double wrap_2pi(double a) {  // wrap to [0, 2pi)
  a = std::fmod(a, 2.0 * kPi);
  return a < 0 ? a + 2.0 * kPi : a;
}

// A ground-truth object placed at a node, tagged with the perspective view
// (one of 12 headings x 3 elevations) it would be detected in.
struct Landmark {
  int cls = 0;
  double heading = 0.0;    // absolute, [0, 2pi)
  double elevation = 0.0;  // [-pi/2, pi/2]
  std::array<double, 4> box{0, 0, 1, 1};  // normalized x1,y1,x2,y2
};

struct GraphNode {
  int id = 0;
  std::array<double, 3> pos{0, 0, 0};  // meters
  std::vector<Landmark> landmarks;
};

struct NavGraph {
  std::vector<GraphNode> nodes;
  std::vector<std::pair<int, int>> edges;  // undirected, a < b
  // adjacency[i] = list of (neighbor, euclidean length)
  std::vector<std::vector<std::pair<int, double>>> adjacency;

  int n_nodes() const { return static_cast<int>(nodes.size()); }

  double euclidean(int a, int b) const {
    const auto &p = nodes[a].pos, &q = nodes[b].pos;
    double dx = p[0] - q[0], dy = p[1] - q[1], dz = p[2] - q[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
  }

  // heading of the move a -> b in the xy plane, [0, 2pi), CCW from +x
  double move_heading(int a, int b) const {
    const auto &p = nodes[a].pos, &q = nodes[b].pos;
    return wrap_2pi(std::atan2(q[1] - p[1], q[0] - p[0]));
  }

  bool adjacent(int a, int b) const {
    for (const auto& [n, w] : adjacency[a])
      if (n == b) return true;
    return false;
  }

  void rebuild_adjacency() {
    adjacency.assign(nodes.size(), {});
    for (const auto& [a, b] : edges) {
      double w = euclidean(a, b);
      adjacency[a].push_back({b, w});
      adjacency[b].push_back({a, w});
    }
    for (auto& nb : adjacency) std::sort(nb.begin(), nb.end());
  }

  bool connected() const {
    if (nodes.empty()) return false;
    std::vector<char> seen(nodes.size(), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int cnt = 1;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (const auto& [n, w] : adjacency[v])
        if (!seen[n]) {
          seen[n] = 1;
          ++cnt;
          stack.push_back(n);
        }
    }
    return cnt == n_nodes();
  }
};

// Pose after arriving at a node: heading of the incoming move.
struct Pose {
  double heading = 0.0;  // [0, 2pi)
  double elevation = 0.0;
};

struct Trajectory {
  std::vector<int> nodes;   // [v_s, v_1, ...]
  std::vector<Pose> poses;  // one per node; poses[0] is the start orientation

  int final_node() const { return nodes.back(); }
};

struct Instruction {
  std::vector<int> tokens;  // word ids, no CLS/SEP
  std::vector<int> clause_breaks;  // token index of each "then" separator
};

struct EpisodeSpec {
  int id = 0;
  int graph_id = 0;
  int start = 0;
  int goal = 0;
  std::vector<int> gt_path;  // shortest path start..goal
  Instruction instruction;
};

// --- generation -----------------------------------------------------------

struct EnvGenParams {
  int n_nodes = 25;
  double area_m = 22.0;
  int landmark_vocab_size = 20;
  int class_lo = 0;   // landmark classes drawn from [class_lo, class_hi)
  int class_hi = 20;
  int max_retries = 50;
};

// Random geometric graph over a square, radius tuned for mean degree ~4-6.
inline NavGraph generate_environment(uint64_t seed, const EnvGenParams& gp) {
  if (gp.n_nodes < 2) throw std::invalid_argument("generate_environment: n_nodes < 2");
  if (gp.class_hi > gp.landmark_vocab_size || gp.class_lo >= gp.class_hi)
    throw std::invalid_argument("generate_environment: bad class range");
  std::mt19937_64 rng(seed);
  const double base_radius = 1.25 * gp.area_m / std::sqrt(static_cast<double>(gp.n_nodes));
  for (int attempt = 0; attempt < gp.max_retries; ++attempt) {
    NavGraph g;
    std::uniform_real_distribution<double> ux(0.0, gp.area_m), uz(0.0, 0.3);
    for (int i = 0; i < gp.n_nodes; ++i) {
      GraphNode n;
      n.id = i;
      n.pos = {ux(rng), ux(rng), uz(rng)};
      g.nodes.push_back(n);
    }
    const double radius = base_radius * (1.0 + 0.15 * attempt);
    for (int a = 0; a < gp.n_nodes; ++a)
      for (int b = a + 1; b < gp.n_nodes; ++b)
        if (g.euclidean(a, b) <= radius) g.edges.push_back({a, b});
    g.rebuild_adjacency();
    if (!g.connected()) continue;

    std::uniform_int_distribution<int> ncount(3, 8);
    std::uniform_int_distribution<int> ucls(gp.class_lo, gp.class_hi - 1);
    std::uniform_real_distribution<double> uh(0.0, 2.0 * kPi);
    std::uniform_real_distribution<double> ue(-kPi / 4.0, kPi / 4.0);
    std::uniform_real_distribution<double> usz(0.08, 0.3);
    for (auto& node : g.nodes) {
      int k = ncount(rng);
      for (int j = 0; j < k; ++j) {
        Landmark lm;
        lm.cls = ucls(rng);
        lm.heading = uh(rng);
        lm.elevation = ue(rng);
        double cx = 0.2 + 0.6 * std::uniform_real_distribution<double>(0, 1)(rng);
        double cy = 0.2 + 0.6 * std::uniform_real_distribution<double>(0, 1)(rng);
        double w = usz(rng), h = usz(rng);
        lm.box = {cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
        node.landmarks.push_back(lm);
      }
    }
    return g;
  }
  throw std::runtime_error("generate_environment: graph disconnected after max retries");
}

// --- geodesics ------------------------------------------------------------

// single-source Dijkstra; returns (dist, predecessor) with deterministic
// tie-breaking by smaller predecessor id
inline std::pair<std::vector<double>, std::vector<int>> dijkstra(const NavGraph& g, int src) {
  const int n = g.n_nodes();
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<int> pred(n, -1);
  using QE = std::pair<double, int>;
  std::priority_queue<QE, std::vector<QE>, std::greater<>> pq;
  dist[src] = 0.0;
  pq.push({0.0, src});
  while (!pq.empty()) {
    auto [d, v] = pq.top();
    pq.pop();
    if (d > dist[v]) continue;
    for (const auto& [u, w] : g.adjacency[v]) {
      double nd = d + w;
      if (nd < dist[u] - 1e-12 || (std::abs(nd - dist[u]) <= 1e-12 && pred[u] > v)) {
        dist[u] = nd;
        pred[u] = v;
        pq.push({nd, u});
      }
    }
  }
  return {dist, pred};
}

inline double geodesic(const NavGraph& g, int a, int b) {
  if (a < 0 || a >= g.n_nodes() || b < 0 || b >= g.n_nodes())
    throw std::out_of_range("geodesic: node out of range");
  if (a == b) return 0.0;
  auto [dist, pred] = dijkstra(g, a);
  if (!std::isfinite(dist[b])) throw std::runtime_error("geodesic: unreachable node");
  return dist[b];
}

inline std::vector<int> shortest_path(const NavGraph& g, int a, int b) {
  auto [dist, pred] = dijkstra(g, a);
  if (!std::isfinite(dist[b])) throw std::runtime_error("shortest_path: unreachable node");
  std::vector<int> path;
  for (int v = b; v != -1; v = pred[v]) path.push_back(v);
  std::reverse(path.begin(), path.end());
  return path;
}

// Attach arrival poses to a node path. poses[0] faces the first move
// (or heading 0 for a single-node path).
inline Trajectory make_trajectory(const NavGraph& g, const std::vector<int>& nodes) {
  if (nodes.empty()) throw std::invalid_argument("make_trajectory: empty path");
  for (size_t i = 0; i + 1 < nodes.size(); ++i)
    if (!g.adjacent(nodes[i], nodes[i + 1]))
      throw std::invalid_argument("make_trajectory: non-adjacent step");
  Trajectory t;
  t.nodes = nodes;
  t.poses.resize(nodes.size());
  double h0 = nodes.size() > 1 ? g.move_heading(nodes[0], nodes[1]) : 0.0;
  t.poses[0] = {h0, 0.0};
  for (size_t i = 1; i < nodes.size(); ++i)
    t.poses[i] = {g.move_heading(nodes[i - 1], nodes[i]), 0.0};
  return t;
}

inline bool is_success(const NavGraph& g, const Trajectory& t, int goal) {
  return geodesic(g, t.final_node(), goal) < kSuccessRadiusM;
}

// --- instruction synthesis ------------------------------------------------

// Positive heading change (CCW from above) is "left".
constexpr double kTurnThresholdRad = kPi / 6.0;  // 30 degrees

inline int turn_word(const Vocab& v, double signed_turn) {
  if (signed_turn > kTurnThresholdRad) return v.id("left");
  if (signed_turn < -kTurnThresholdRad) return v.id("right");
  return v.id("forward");
}

// Deterministically pick the landmark mentioned for a node.
inline int salient_landmark_class(const NavGraph& g, int node, uint64_t seed) {
  const auto& lms = g.nodes[node].landmarks;
  if (lms.empty()) return -1;
  std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ull * (static_cast<uint64_t>(node) + 1)));
  return lms[rng() % lms.size()].cls;
}

// Template-based clause sequence: one movement clause per hop, a terminal
// goal-landmark phrase, clauses joined with "then".
inline Instruction synthesize_instruction(const NavGraph& g, const std::vector<int>& path,
                                          const Vocab& vocab, uint64_t seed, int max_len = 60) {
  if (path.size() < 2) throw std::invalid_argument("synthesize_instruction: path too short");
  std::mt19937_64 rng(seed);
  Instruction ins;
  auto push = [&](int tok) { ins.tokens.push_back(tok); };
  auto push_then = [&] {
    ins.clause_breaks.push_back(static_cast<int>(ins.tokens.size()));
    push(vocab.id("then"));
  };
  const int verbs[2] = {vocab.id("go"), vocab.id("walk")};
  double prev_heading = g.move_heading(path[0], path[1]);
  for (size_t i = 1; i < path.size(); ++i) {
    if (i > 1) push_then();
    double h = g.move_heading(path[i - 1], path[i]);
    double turn = (i == 1) ? 0.0 : wrap_pi(h - prev_heading);
    prev_heading = h;
    push(verbs[rng() % 2]);
    push(turn_word(vocab, turn));
    int cls = salient_landmark_class(g, path[i], seed);
    if (cls >= 0 && i + 1 < path.size()) {
      push(vocab.id("past"));
      push(vocab.id("the"));
      push(vocab.landmark_word(cls));
    }
  }
  push_then();
  push(vocab.id("stop"));
  push(vocab.id("at"));
  push(vocab.id("the"));
  int goal_cls = salient_landmark_class(g, path.back(), seed);
  push(vocab.landmark_word(goal_cls >= 0 ? goal_cls : 0));
  if (static_cast<int>(ins.tokens.size()) > max_len)
    ins.tokens.resize(static_cast<size_t>(max_len));
  return ins;
}

// --- episode generation ---------------------------------------------------

struct EpisodeGenParams {
  int min_hops = 2;
  int max_hops = 5;
  int max_len = 60;
};

inline std::vector<EpisodeSpec> generate_episodes(const NavGraph& g, int graph_id, int count,
                                                  const Vocab& vocab, uint64_t seed,
                                                  const EpisodeGenParams& ep = {}) {
  std::mt19937_64 rng(seed);
  std::vector<EpisodeSpec> out;
  int guard = 0;
  while (static_cast<int>(out.size()) < count && guard++ < count * 200) {
    int start = static_cast<int>(rng() % static_cast<uint64_t>(g.n_nodes()));
    int goal = static_cast<int>(rng() % static_cast<uint64_t>(g.n_nodes()));
    if (start == goal) continue;
    auto path = shortest_path(g, start, goal);
    int hops = static_cast<int>(path.size()) - 1;
    if (hops < ep.min_hops || hops > ep.max_hops) continue;
    EpisodeSpec e;
    e.id = static_cast<int>(out.size());
    e.graph_id = graph_id;
    e.start = start;
    e.goal = goal;
    e.gt_path = path;
    e.instruction = synthesize_instruction(g, path, vocab, rng(), ep.max_len);
    out.push_back(std::move(e));
  }
  if (static_cast<int>(out.size()) < count)
    throw std::runtime_error("generate_episodes: could not sample enough episodes");
  return out;
}

}  // namespace pathrank
