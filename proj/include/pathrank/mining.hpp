#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <vector>

#include "pathrank/envgraph.hpp"
#include "pathrank/featurize.hpp"

namespace pathrank {

constexpr int kStopAction = -1;

// Scripted instruction-following heuristic used to beam-search candidates.
struct FollowerPolicy {
  double landmark_weight = 1.5;
  double direction_weight = 1.0;
  double stop_bias = 3.0;
  double stop_penalty = 1.5;  // subtracted from STOP before goal evidence
  double noise_sigma = 0.4;
  uint64_t seed = 0;
};

struct Candidate {
  Trajectory trajectory;
  double logprob = 0.0;
  bool success = false;
};

struct CandidateSet {
  int episode_id = 0;
  std::vector<Candidate> candidates;  // sorted by logprob, descending
};

struct TrainingQuad {
  int episode_id = 0;
  int positive = 0;                // index into candidates
  std::array<int, 3> negatives{};  // indices into candidates
};

namespace detail {

inline uint64_t mix64(uint64_t x) {
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdull;
  x ^= x >> 33;
  x *= 0xc4ceb9fe1a85ec53ull;
  x ^= x >> 33;
  return x;
}

inline uint64_t token_hash(const std::vector<int>& toks) {
  uint64_t h = 1469598103934665603ull;
  for (int t : toks) {
    h ^= static_cast<uint64_t>(t) + 0x9e37ull;
    h *= 1099511628211ull;
  }
  return h;
}

// deterministic standard normal keyed on the tuple
inline double keyed_gauss(uint64_t seed, uint64_t a, uint64_t b, uint64_t c) {
  uint64_t u = mix64(seed ^ mix64(a + 0x1p1) ^ mix64(b * 0x9e3779b97f4a7c15ull + 1) ^
                     mix64(c * 0xbf58476d1ce4e5b9ull + 1));
  uint64_t v = mix64(u + 0x94d049bb133111ebull);
  double x = (static_cast<double>(u >> 11) + 0.5) * 0x1p-53;
  double y = (static_cast<double>(v >> 11) + 0.5) * 0x1p-53;
  return std::sqrt(-2.0 * std::log(x)) * std::cos(2.0 * kPi * y);
}

struct Clause {
  int direction = -1;             // token id of forward/left/right, -1 if none
  std::vector<int> landmarks;     // landmark classes named in the clause
};

inline std::vector<Clause> parse_clauses(const std::vector<int>& tokens, const Vocab& v) {
  std::vector<Clause> out(1);
  for (int tok : tokens) {
    if (tok == v.id("then")) {
      out.emplace_back();
      continue;
    }
    Clause& c = out.back();
    if (tok == v.id("forward") || tok == v.id("left") || tok == v.id("right")) c.direction = tok;
    if (v.is_landmark_word(tok)) c.landmarks.push_back(v.landmark_class_of(tok));
  }
  return out;
}

inline double landmark_overlap(const std::vector<int>& wanted, const std::vector<Landmark>& have) {
  if (wanted.empty()) return 0.0;
  double hits = 0;
  for (int w : wanted)
    for (const auto& lm : have)
      if (lm.cls == w) {
        hits += 1.0;
        break;
      }
  return hits / static_cast<double>(wanted.size());
}

}  // namespace detail

// Log-probabilities over {neighbors (ascending id), STOP}; the STOP entry is
// last. logsumexp of the result is 0.
inline std::vector<double> follower_step_logprobs(const FollowerPolicy& policy, const NavGraph& g,
                                                  int node, double heading,
                                                  const Instruction& instruction, int step,
                                                  const Vocab& vocab) {
  auto clauses = detail::parse_clauses(instruction.tokens, vocab);
  const detail::Clause& clause =
      clauses[static_cast<size_t>(std::min<int>(step, static_cast<int>(clauses.size()) - 1))];
  const detail::Clause& goal_clause = clauses.back();
  const uint64_t salt = detail::token_hash(instruction.tokens);

  const auto& nbrs = g.adjacency[static_cast<size_t>(node)];  // sorted by id
  std::vector<double> logits;
  for (size_t a = 0; a < nbrs.size(); ++a) {
    int nb = nbrs[a].first;
    double turn = wrap_pi(g.move_heading(node, nb) - heading);
    double expect = 0.0;
    if (clause.direction == vocab.id("left")) expect = kPi / 2;
    if (clause.direction == vocab.id("right")) expect = -kPi / 2;
    double dir_score = clause.direction >= 0 ? std::cos(turn - expect) : 0.0;
    double lm_score =
        detail::landmark_overlap(clause.landmarks, g.nodes[static_cast<size_t>(nb)].landmarks);
    double noise = policy.noise_sigma *
                   detail::keyed_gauss(policy.seed ^ salt, static_cast<uint64_t>(node),
                                       static_cast<uint64_t>(step), static_cast<uint64_t>(nb) + 2);
    logits.push_back(policy.landmark_weight * lm_score + policy.direction_weight * dir_score +
                     noise);
  }
  double goal_evidence =
      detail::landmark_overlap(goal_clause.landmarks, g.nodes[static_cast<size_t>(node)].landmarks);
  double stop_noise = policy.noise_sigma *
                      detail::keyed_gauss(policy.seed ^ salt, static_cast<uint64_t>(node),
                                          static_cast<uint64_t>(step), 1);
  logits.push_back(policy.stop_bias * goal_evidence - policy.stop_penalty + stop_noise);

  double mx = *std::max_element(logits.begin(), logits.end());
  double lse = 0;
  for (double l : logits) lse += std::exp(l - mx);
  lse = mx + std::log(lse);
  for (double& l : logits) l -= lse;
  return logits;
}

struct BeamSearchParams {
  int beam_width = 30;
  int extra_steps = 4;  // max_steps = shortest-path hops + extra
};

// Finished-path banking: a trajectory leaves the active beam when STOP is
// chosen or max_steps is reached; the active beam refills from remaining
// expansions. Returns up to beam_width finished paths sorted by cumulative
// log-prob, deduplicated by node sequence.
inline CandidateSet beam_search(const FollowerPolicy& policy, const NavGraph& g,
                                const EpisodeSpec& episode, const Vocab& vocab,
                                const BeamSearchParams& bp = {}, int max_steps_override = -1) {
  if (bp.beam_width < 1) throw std::invalid_argument("beam_search: beam_width < 1");
  const int max_steps =
      max_steps_override > 0
          ? max_steps_override
          : static_cast<int>(episode.gt_path.size()) - 1 + bp.extra_steps;

  struct Partial {
    std::vector<int> nodes;
    double heading = 0.0;
    double logprob = 0.0;
  };
  std::vector<Partial> active{{{episode.start}, 0.0, 0.0}};
  std::vector<std::pair<std::vector<int>, double>> finished;

  for (int step = 0; step <= max_steps && !active.empty(); ++step) {
    std::vector<Partial> expansions;
    for (const Partial& p : active) {
      int node = p.nodes.back();
      auto lp = follower_step_logprobs(policy, g, node, p.heading, episode.instruction, step, vocab);
      const auto& nbrs = g.adjacency[static_cast<size_t>(node)];
      finished.push_back({p.nodes, p.logprob + lp.back()});  // STOP chosen
      if (step == max_steps) continue;                        // forced out of the beam
      for (size_t a = 0; a < nbrs.size(); ++a) {
        Partial q = p;
        q.nodes.push_back(nbrs[a].first);
        q.heading = g.move_heading(node, nbrs[a].first);
        q.logprob += lp[a];
        expansions.push_back(std::move(q));
      }
    }
    std::stable_sort(expansions.begin(), expansions.end(),
                     [](const Partial& a, const Partial& b) { return a.logprob > b.logprob; });
    if (static_cast<int>(expansions.size()) > bp.beam_width)
      expansions.resize(static_cast<size_t>(bp.beam_width));
    active = std::move(expansions);
  }

  std::stable_sort(finished.begin(), finished.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  CandidateSet cs;
  cs.episode_id = episode.id;
  std::set<std::vector<int>> seen;
  for (auto& [nodes, lp] : finished) {
    if (static_cast<int>(cs.candidates.size()) >= bp.beam_width) break;
    if (!seen.insert(nodes).second) continue;
    Candidate c;
    c.trajectory = make_trajectory(g, nodes);
    c.logprob = lp;
    c.success = is_success(g, c.trajectory, episode.goal);
    cs.candidates.push_back(std::move(c));
  }
  return cs;
}

// Uniform positive + three uniform negatives, without replacement.
// Returns nullopt (skip-example) when the set lacks 1 success or 3 failures.
inline std::optional<TrainingQuad> sample_quad(const CandidateSet& cs, uint64_t seed) {
  std::vector<int> pos, neg;
  for (size_t i = 0; i < cs.candidates.size(); ++i)
    (cs.candidates[i].success ? pos : neg).push_back(static_cast<int>(i));
  if (pos.empty() || neg.size() < 3) return std::nullopt;
  std::mt19937_64 rng(seed ^ detail::mix64(static_cast<uint64_t>(cs.episode_id) + 0x51ull));
  TrainingQuad q;
  q.episode_id = cs.episode_id;
  q.positive = pos[rng() % pos.size()];
  std::shuffle(neg.begin(), neg.end(), rng);
  for (int i = 0; i < 3; ++i) q.negatives[static_cast<size_t>(i)] = neg[static_cast<size_t>(i)];
  return q;
}

}  // namespace pathrank
