#include <algorithm>

#include "doctest.h"
#include "pathrank/envgraph.hpp"

using namespace pathrank;

static NavGraph line_graph(std::vector<std::array<double, 3>> pts) {
  NavGraph g;
  for (size_t i = 0; i < pts.size(); ++i) {
    GraphNode n;
    n.id = static_cast<int>(i);
    n.pos = pts[i];
    Landmark lm;
    lm.cls = static_cast<int>(i) % 3;
    n.landmarks = {lm};
    g.nodes.push_back(n);
  }
  for (size_t i = 0; i + 1 < pts.size(); ++i) g.edges.push_back({(int)i, (int)(i + 1)});
  g.rebuild_adjacency();
  return g;
}

TEST_CASE("environment generation is deterministic in the seed") {
  EnvGenParams gp;
  auto a = generate_environment(7, gp);
  auto b = generate_environment(7, gp);
  REQUIRE(a.n_nodes() == b.n_nodes());
  CHECK(a.edges == b.edges);
  for (int i = 0; i < a.n_nodes(); ++i) {
    CHECK(a.nodes[i].pos == b.nodes[i].pos);
    REQUIRE(a.nodes[i].landmarks.size() == b.nodes[i].landmarks.size());
    for (size_t j = 0; j < a.nodes[i].landmarks.size(); ++j)
      CHECK(a.nodes[i].landmarks[j].cls == b.nodes[i].landmarks[j].cls);
  }
  auto c = generate_environment(8, gp);
  CHECK(a.edges != c.edges);
}

TEST_CASE("two-node environment is a single edge") {
  EnvGenParams gp;
  gp.n_nodes = 2;
  auto g = generate_environment(3, gp);
  CHECK(g.edges.size() == 1);
  CHECK(g.connected());
}

TEST_CASE("mean degree lands in [3, 8] for 50 nodes over 30m") {
  EnvGenParams gp;
  gp.n_nodes = 50;
  gp.area_m = 30.0;
  double total = 0;
  const int seeds = 100;
  for (int s = 0; s < seeds; ++s) {
    auto g = generate_environment(1000 + s, gp);
    total += 2.0 * g.edges.size() / g.n_nodes();
  }
  double mean_degree = total / seeds;
  CHECK(mean_degree > 3.0);
  CHECK(mean_degree < 8.0);
}

TEST_CASE("edge lengths equal euclidean distance, no self loops") {
  auto g = generate_environment(5, {});
  for (auto [a, b] : g.edges) {
    CHECK(a != b);
    for (auto [n, w] : g.adjacency[a])
      if (n == b) CHECK(w == doctest::Approx(g.euclidean(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("geodesic basics") {
  auto g = line_graph({{0, 0, 0}, {2.5, 0, 0}});
  CHECK(geodesic(g, 0, 0) == doctest::Approx(0.0));
  CHECK(geodesic(g, 0, 1) == doctest::Approx(2.5));
  CHECK(geodesic(g, 1, 0) == doctest::Approx(2.5));  // symmetric
}

TEST_CASE("geodesic matches Floyd-Warshall oracle on a random graph") {
  EnvGenParams gp;
  gp.n_nodes = 30;
  auto g = generate_environment(21, gp);
  const int n = g.n_nodes();
  // independent all-pairs oracle
  std::vector<std::vector<double>> d(n, std::vector<double>(n, 1e18));
  for (int i = 0; i < n; ++i) d[i][i] = 0;
  for (auto [a, b] : g.edges) d[a][b] = d[b][a] = g.euclidean(a, b);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) CHECK(geodesic(g, i, j) == doctest::Approx(d[i][j]).epsilon(1e-9));
}

TEST_CASE("success radius is strict at 3m") {
  auto exact = line_graph({{0, 0, 0}, {3.0, 0, 0}});
  auto t1 = make_trajectory(exact, {0});
  CHECK_FALSE(is_success(exact, t1, 1));  // exactly 3.0m away
  auto near = line_graph({{0, 0, 0}, {2.9, 0, 0}});
  CHECK(is_success(near, make_trajectory(near, {0}), 1));
  CHECK(is_success(near, make_trajectory(near, {0, 1}), 1));  // at goal
}

TEST_CASE("trajectories require adjacency") {
  auto g = line_graph({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}});
  CHECK_THROWS_AS(make_trajectory(g, {0, 2}), std::invalid_argument);
  auto t = make_trajectory(g, {0, 1, 2});
  for (auto& p : t.poses) {
    CHECK(p.heading >= 0.0);
    CHECK(p.heading < 2 * kPi);
  }
}

TEST_CASE("straight path instruction has forward and no turn words") {
  Vocab v(3);
  auto g = line_graph({{0, 0, 0}, {2, 0, 0}, {4, 0, 0}});
  auto ins = synthesize_instruction(g, {0, 1, 2}, v, 5);
  bool has_fwd = false;
  for (int tok : ins.tokens) {
    CHECK(tok != v.id("left"));
    CHECK(tok != v.id("right"));
    if (tok == v.id("forward")) has_fwd = true;
  }
  CHECK(has_fwd);
}

TEST_CASE("+90 degree turn produces 'left' per the CCW sign convention") {
  Vocab v(3);
  // east then north: heading change +pi/2 (CCW) -> left
  auto g = line_graph({{0, 0, 0}, {2, 0, 0}, {2, 2, 0}});
  auto ins = synthesize_instruction(g, {0, 1, 2}, v, 5);
  CHECK(std::count(ins.tokens.begin(), ins.tokens.end(), v.id("left")) == 1);
  CHECK(std::count(ins.tokens.begin(), ins.tokens.end(), v.id("right")) == 0);
  // east then south -> right
  auto g2 = line_graph({{0, 0, 0}, {2, 0, 0}, {2, -2, 0}});
  auto ins2 = synthesize_instruction(g2, {0, 1, 2}, v, 5);
  CHECK(std::count(ins2.tokens.begin(), ins2.tokens.end(), v.id("right")) == 1);
}

TEST_CASE("final clause names the goal landmark") {
  Vocab v(5);
  auto g = line_graph({{0, 0, 0}, {2, 0, 0}, {4, 0, 0}});
  g.nodes[2].landmarks[0].cls = 4;
  auto ins = synthesize_instruction(g, {0, 1, 2}, v, 9);
  REQUIRE(!ins.tokens.empty());
  CHECK(ins.tokens.back() == v.landmark_word(4));
}

TEST_CASE("generated episodes carry verified shortest paths") {
  Vocab v(20);
  auto g = generate_environment(33, {});
  auto eps = generate_episodes(g, 0, 20, v, 99);
  REQUIRE(eps.size() == 20);
  for (const auto& e : eps) {
    double plen = 0;
    for (size_t i = 0; i + 1 < e.gt_path.size(); ++i) {
      CHECK(g.adjacent(e.gt_path[i], e.gt_path[i + 1]));
      plen += g.euclidean(e.gt_path[i], e.gt_path[i + 1]);
    }
    CHECK(e.gt_path.front() == e.start);
    CHECK(e.gt_path.back() == e.goal);
    CHECK(plen == doctest::Approx(geodesic(g, e.start, e.goal)).epsilon(1e-9));
    CHECK(!e.instruction.tokens.empty());
    CHECK(e.instruction.tokens.size() <= 60);
  }
}
