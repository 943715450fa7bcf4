#include <cmath>
#include <map>

#include "doctest.h"
#include "pathrank/mining.hpp"

using namespace pathrank;

namespace {

NavGraph grid_graphlet(std::vector<std::array<double, 3>> pts,
                       std::vector<std::pair<int, int>> edges, int goal_cls = 2) {
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
  g.nodes.back().landmarks[0].cls = goal_cls;
  g.edges = std::move(edges);
  g.rebuild_adjacency();
  return g;
}

EpisodeSpec episode_for(const NavGraph& g, int start, int goal, const Vocab& v, uint64_t seed) {
  EpisodeSpec e;
  e.id = 0;
  e.start = start;
  e.goal = goal;
  e.gt_path = shortest_path(g, start, goal);
  e.instruction = synthesize_instruction(g, e.gt_path, v, seed);
  return e;
}

// independent exhaustive oracle: every path with <= max_steps hops, each
// scored as the sum of its move log-probs plus STOP at its final depth
void enumerate_paths(const FollowerPolicy& pol, const NavGraph& g, const EpisodeSpec& ep,
                     const Vocab& v, int max_steps, std::vector<int>& nodes, double heading,
                     double logprob, int step,
                     std::vector<std::pair<std::vector<int>, double>>& out) {
  auto lp = follower_step_logprobs(pol, g, nodes.back(), heading, ep.instruction, step, v);
  out.push_back({nodes, logprob + lp.back()});
  if (step == max_steps) return;
  const auto& nbrs = g.adjacency[static_cast<size_t>(nodes.back())];
  for (size_t a = 0; a < nbrs.size(); ++a) {
    nodes.push_back(nbrs[a].first);
    enumerate_paths(pol, g, ep, v, max_steps, nodes, g.move_heading(nodes[nodes.size() - 2], nbrs[a].first),
                    logprob + lp[a], step + 1, out);
    nodes.pop_back();
  }
}

}  // namespace

TEST_CASE("follower logprobs are normalized (logsumexp = 0)") {
  Vocab v(3);
  auto g = grid_graphlet({{0, 0, 0}, {2, 0, 0}, {2, 2, 0}}, {{0, 1}, {1, 2}});
  auto ep = episode_for(g, 0, 2, v, 1);
  for (int step = 0; step < 3; ++step) {
    auto lp = follower_step_logprobs({}, g, 1, 0.0, ep.instruction, step, v);
    double lse = 0;
    for (double l : lp) lse += std::exp(l);
    CHECK(std::log(lse) == doctest::Approx(0.0).epsilon(1e-6));
  }
}

TEST_CASE("single neighbor with STOP suppressed gets logprob ~0") {
  Vocab v(3);
  auto g = grid_graphlet({{0, 0, 0}, {2, 0, 0}}, {{0, 1}});
  auto ep = episode_for(g, 0, 1, v, 1);
  FollowerPolicy pol;
  pol.stop_penalty = 1e9;  // effectively -inf STOP
  pol.noise_sigma = 0;
  auto lp = follower_step_logprobs(pol, g, 0, 0.0, ep.instruction, 0, v);
  REQUIRE(lp.size() == 2);
  CHECK(lp[0] == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("zero noise symmetric tie breaks deterministically by node id") {
  Vocab v(3);
  // two mirror neighbors at +/-90 degrees, identical landmarks
  auto g = grid_graphlet({{0, 0, 0}, {0, 2, 0}, {0, -2, 0}}, {{0, 1}, {0, 2}});
  g.nodes[1].landmarks[0].cls = 0;
  g.nodes[2].landmarks[0].cls = 0;
  EpisodeSpec ep;
  ep.start = 0;
  ep.goal = 1;
  ep.gt_path = {0, 1};
  ep.instruction.tokens = {v.id("go"), v.id("forward")};  // no bias either way
  FollowerPolicy pol;
  pol.noise_sigma = 0;
  auto lp = follower_step_logprobs(pol, g, 0, 0.0, ep.instruction, 0, v);
  CHECK(lp[0] == doctest::Approx(lp[1]));
  BeamSearchParams bp;
  bp.beam_width = 1;
  auto cs = beam_search(pol, g, ep, v, bp);
  bool found = false;
  for (auto& c : cs.candidates)
    if (c.trajectory.nodes.size() == 2) {
      CHECK(c.trajectory.nodes[1] == 1);  // lower id wins the tie
      found = true;
      break;
    }
  CHECK(found);
}

TEST_CASE("path graph yields the single path plus stopped prefixes") {
  Vocab v(3);
  auto g = grid_graphlet({{0, 0, 0}, {2, 0, 0}, {4, 0, 0}}, {{0, 1}, {1, 2}});
  auto ep = episode_for(g, 0, 2, v, 3);
  FollowerPolicy pol;
  pol.noise_sigma = 0;
  auto cs = beam_search(pol, g, ep, v, {}, 2);
  // reachable node sequences: [0], [0,1], [0,1,0], [0,1,2]
  for (auto& c : cs.candidates) {
    for (size_t i = 0; i + 1 < c.trajectory.nodes.size(); ++i)
      CHECK(g.adjacent(c.trajectory.nodes[i], c.trajectory.nodes[i + 1]));
    CHECK(c.trajectory.nodes.front() == 0);
  }
  bool has_full = false;
  for (auto& c : cs.candidates)
    if (c.trajectory.nodes == std::vector<int>{0, 1, 2}) has_full = true;
  CHECK(has_full);
}

TEST_CASE("beam search matches exhaustive enumeration when the beam covers all paths") {
  Vocab v(8);
  for (uint64_t seed = 0; seed < 20; ++seed) {
    EnvGenParams gp;
    gp.n_nodes = 6 + static_cast<int>(seed % 7);  // <= 12 nodes
    gp.area_m = 12.0;
    gp.landmark_vocab_size = 8;
    gp.class_hi = 8;
    auto g = generate_environment(500 + seed, gp);
    Vocab vv(8);
    auto eps = generate_episodes(g, 0, 1, vv, 600 + seed, {1, 3, 60});
    auto& ep = eps[0];
    const int max_steps = 4;
    FollowerPolicy pol;
    pol.seed = seed;

    std::vector<std::pair<std::vector<int>, double>> all;
    std::vector<int> nodes{ep.start};
    enumerate_paths(pol, g, ep, vv, max_steps, nodes, 0.0, 0.0, 0, all);
    std::stable_sort(all.begin(), all.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });

    BeamSearchParams bp;
    bp.beam_width = static_cast<int>(all.size());  // >= number of bounded paths
    auto cs = beam_search(pol, g, ep, vv, bp, max_steps);
    REQUIRE(!cs.candidates.empty());
    CHECK(cs.candidates[0].trajectory.nodes == all[0].first);
    CHECK(cs.candidates[0].logprob == doctest::Approx(all[0].second).epsilon(1e-9));
  }
}

TEST_CASE("wider beams never lose log-prob on the top path") {
  Vocab v(20);
  auto g = generate_environment(91, {});
  auto eps = generate_episodes(g, 0, 5, v, 92);
  for (auto& ep : eps) {
    double prev = -1e18;
    for (int width : {1, 3, 10, 30}) {
      BeamSearchParams bp;
      bp.beam_width = width;
      auto cs = beam_search({}, g, ep, v, bp);
      REQUIRE(!cs.candidates.empty());
      CHECK(cs.candidates[0].logprob >= prev - 1e-12);
      prev = cs.candidates[0].logprob;
    }
  }
}

TEST_CASE("candidate sets are reproducible and graph-valid") {
  Vocab v(20);
  auto g = generate_environment(44, {});
  auto eps = generate_episodes(g, 0, 3, v, 45);
  FollowerPolicy pol;
  pol.seed = 9;
  for (auto& ep : eps) {
    auto a = beam_search(pol, g, ep, v);
    auto b = beam_search(pol, g, ep, v);
    REQUIRE(a.candidates.size() == b.candidates.size());
    for (size_t i = 0; i < a.candidates.size(); ++i) {
      CHECK(a.candidates[i].trajectory.nodes == b.candidates[i].trajectory.nodes);
      CHECK(a.candidates[i].logprob == b.candidates[i].logprob);
      CHECK(a.candidates[i].trajectory.nodes.front() == ep.start);
      CHECK(a.candidates[i].success == is_success(g, a.candidates[i].trajectory, ep.goal));
    }
  }
}

TEST_CASE("sample_quad basics") {
  CandidateSet cs;
  cs.episode_id = 3;
  for (int i = 0; i < 4; ++i) {
    Candidate c;
    c.success = (i == 2);
    cs.candidates.push_back(c);
  }
  auto q = sample_quad(cs, 7);
  REQUIRE(q.has_value());
  CHECK(q->positive == 2);
  std::array<int, 3> negs = q->negatives;
  std::sort(negs.begin(), negs.end());
  CHECK(negs == std::array<int, 3>{0, 1, 3});
  // determinism
  auto q2 = sample_quad(cs, 7);
  CHECK(q2->negatives == q->negatives);
  // insufficient negatives -> skip signal
  cs.candidates.pop_back();
  CHECK_FALSE(sample_quad(cs, 7).has_value());
}

TEST_CASE("sample_quad class membership is always 1 positive + 3 negatives") {
  CandidateSet cs;
  cs.episode_id = 11;
  for (int i = 0; i < 12; ++i) {
    Candidate c;
    c.success = (i % 3 == 0);
    cs.candidates.push_back(c);
  }
  std::map<int, int> pos_counts;
  for (uint64_t seed = 0; seed < 1000; ++seed) {
    auto q = sample_quad(cs, seed);
    REQUIRE(q.has_value());
    CHECK(cs.candidates[static_cast<size_t>(q->positive)].success);
    for (int n : q->negatives) {
      CHECK_FALSE(cs.candidates[static_cast<size_t>(n)].success);
      CHECK(n != q->positive);
    }
    std::array<int, 3> u = q->negatives;
    std::sort(u.begin(), u.end());
    CHECK(std::unique(u.begin(), u.end()) == u.end());
    pos_counts[q->positive]++;
  }
  // uniformity over the 4 successful candidates: each picked a fair share
  for (auto& [idx, cnt] : pos_counts) CHECK(cnt > 150);
}
