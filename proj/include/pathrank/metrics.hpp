#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "pathrank/envgraph.hpp"
#include "pathrank/mining.hpp"

namespace pathrank {

struct MetricsRecord {
  double sr = 0;   // stop within 3m of the goal
  double osr = 0;  // any visited node within 3m
  double ne = 0;   // geodesic from final node to goal, meters
  double pl = 0;   // traversed path length, meters
  double spl = 0;  // SR * l / max(p, l)
};

struct AggregateMetrics {
  double sr = 0, osr = 0, ne = 0, pl = 0, spl = 0;
  int n = 0;
};

// leaderboard mode prepends the exploration trajectory to the path length
inline MetricsRecord compute_metrics(const NavGraph& g, const Trajectory& selected,
                                     const EpisodeSpec& episode, bool leaderboard_mode = false,
                                     const Trajectory* exploration = nullptr) {
  if (selected.nodes.empty()) throw std::invalid_argument("compute_metrics: empty trajectory");
  MetricsRecord m;
  m.ne = geodesic(g, selected.final_node(), episode.goal);
  m.sr = m.ne < kSuccessRadiusM ? 1.0 : 0.0;
  for (int v : selected.nodes)
    if (geodesic(g, v, episode.goal) < kSuccessRadiusM) m.osr = 1.0;
  double pl = 0;
  if (leaderboard_mode && exploration)
    for (size_t i = 0; i + 1 < exploration->nodes.size(); ++i)
      pl += g.euclidean(exploration->nodes[i], exploration->nodes[i + 1]);
  for (size_t i = 0; i + 1 < selected.nodes.size(); ++i)
    pl += g.euclidean(selected.nodes[i], selected.nodes[i + 1]);
  m.pl = pl;
  double l = geodesic(g, episode.start, episode.goal);
  m.spl = m.sr * l / std::max(m.pl, l);
  return m;
}

inline AggregateMetrics aggregate(const std::vector<MetricsRecord>& records) {
  AggregateMetrics a;
  a.n = static_cast<int>(records.size());
  for (const auto& m : records) {
    a.sr += m.sr;
    a.osr += m.osr;
    a.ne += m.ne;
    a.pl += m.pl;
    a.spl += m.spl;
  }
  if (a.n > 0) {
    a.sr /= a.n;
    a.osr /= a.n;
    a.ne /= a.n;
    a.pl /= a.n;
    a.spl /= a.n;
  }
  return a;
}

// One score per candidate, any plug-in (compatibility model, follower logprob, ...).
using Scorer = std::function<std::vector<double>(const CandidateSet&)>;

inline Scorer follower_logprob_scorer() {
  return [](const CandidateSet& cs) {
    std::vector<double> s;
    for (const auto& c : cs.candidates) s.push_back(c.logprob);
    return s;
  };
}

// argmax over candidates; ties broken by lower candidate index
inline int select_path(const std::vector<double>& scores) {
  if (scores.empty()) throw std::invalid_argument("select_path: no candidates");
  int best = 0;
  for (int i = 1; i < static_cast<int>(scores.size()); ++i)
    if (scores[static_cast<size_t>(i)] > scores[static_cast<size_t>(best)]) best = i;
  return best;
}

// z-normalization within one candidate set (degenerate spread -> zeros)
inline std::vector<double> z_normalize(const std::vector<double>& s) {
  double mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
  double var = 0;
  for (double v : s) var += (v - mean) * (v - mean);
  var /= static_cast<double>(s.size());
  double sd = std::sqrt(var);
  std::vector<double> out(s.size());
  for (size_t i = 0; i < s.size(); ++i) out[i] = sd > 1e-12 ? (s[i] - mean) / sd : 0.0;
  return out;
}

struct EnsembleResult {
  std::vector<double> weights;  // on the simplex, one per scorer
  double val_sr = 0;            // selection SR at those weights
};

// Selection SR of a weighted combination of z-normalized scorer outputs.
inline double ensemble_sr(const std::vector<std::vector<std::vector<double>>>& norm_scores,
                          const std::vector<const CandidateSet*>& sets,
                          const std::vector<double>& w) {
  int hits = 0;
  for (size_t e = 0; e < sets.size(); ++e) {
    std::vector<double> mix(sets[e]->candidates.size(), 0.0);
    for (size_t s = 0; s < w.size(); ++s)
      for (size_t c = 0; c < mix.size(); ++c) mix[c] += w[s] * norm_scores[s][e][c];
    if (sets[e]->candidates[static_cast<size_t>(select_path(mix))].success) ++hits;
  }
  return sets.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(sets.size());
}

// Grid search over the simplex (step default 0.05, corners included) for the
// weight vector maximizing selection SR on the given (validation) episodes.
// First-in-grid order wins ties, so the result is deterministic.
inline EnsembleResult ensemble_grid_search(const std::vector<Scorer>& scorers,
                                           const std::vector<const CandidateSet*>& sets,
                                           double grid_step = 0.05) {
  if (scorers.empty() || scorers.size() > 3)
    throw std::invalid_argument("ensemble_grid_search: need 1-3 scorers");
  if (sets.empty()) throw std::invalid_argument("ensemble_grid_search: empty episode set");
  // precompute z-normalized scores per scorer per set
  std::vector<std::vector<std::vector<double>>> norm(scorers.size());
  for (size_t s = 0; s < scorers.size(); ++s)
    for (const CandidateSet* cs : sets) norm[s].push_back(z_normalize(scorers[s](*cs)));

  const int steps = static_cast<int>(std::llround(1.0 / grid_step));
  EnsembleResult best;
  best.val_sr = -1;
  auto consider = [&](std::vector<double> w) {
    double sr = ensemble_sr(norm, sets, w);
    if (sr > best.val_sr) {
      best.val_sr = sr;
      best.weights = std::move(w);
    }
  };
  if (scorers.size() == 1) {
    consider({1.0});
  } else if (scorers.size() == 2) {
    for (int i = 0; i <= steps; ++i)
      consider({static_cast<double>(i) / steps, static_cast<double>(steps - i) / steps});
  } else {
    for (int i = 0; i <= steps; ++i)
      for (int j = 0; j <= steps - i; ++j)
        consider({static_cast<double>(i) / steps, static_cast<double>(j) / steps,
                  static_cast<double>(steps - i - j) / steps});
  }
  return best;
}

}  // namespace pathrank
