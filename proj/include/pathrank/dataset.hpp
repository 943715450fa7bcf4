#pragma once

#include <optional>
#include <random>
#include <vector>

#include "pathrank/envgraph.hpp"
#include "pathrank/featurize.hpp"
#include "pathrank/mining.hpp"

namespace pathrank {

// One environment with its panoramas featurized once (panoramas are pure
// functions of graph + seed, so caching them is free determinism-wise).
struct FeaturizedGraph {
  NavGraph graph;
  std::vector<PanoramaObservation> panos;  // per node

  static FeaturizedGraph build(NavGraph g, const FeaturizeParams& fp, uint64_t seed) {
    FeaturizedGraph fg;
    fg.panos.reserve(g.nodes.size());
    for (int v = 0; v < g.n_nodes(); ++v) fg.panos.push_back(observe_panorama(g, v, fp, seed));
    fg.graph = std::move(g);
    return fg;
  }

  std::vector<PanoramaObservation> panos_for(const Trajectory& t) const {
    std::vector<PanoramaObservation> out;
    out.reserve(t.nodes.size());
    for (int v : t.nodes) out.push_back(panos[static_cast<size_t>(v)]);
    return out;
  }
};

struct SplitEpisode {
  int graph_index = 0;  // into the split's graph list
  EpisodeSpec spec;
};

struct Split {
  std::vector<FeaturizedGraph> graphs;
  std::vector<SplitEpisode> episodes;
};

// A single-panorama + caption pair, the synthetic analog of a web image-text
// pair. Captions may name landmark classes held out of training environments.
struct CaptionExample {
  PanoramaObservation pano;
  std::vector<int> caption;
};

struct BenchmarkConfig {
  uint64_t seed = 1234;
  int landmark_vocab_size = 20;
  int held_out_classes = 5;  // classes [vocab-held_out, vocab) only in val-unseen
  int n_train_graphs = 10;
  int n_val_seen_graphs = 3;
  int n_val_unseen_graphs = 6;
  int train_episodes_per_graph = 24;
  int val_seen_episodes_per_graph = 12;
  int val_unseen_episodes_per_graph = 34;
  int n_captions = 600;
  EnvGenParams env;
  EpisodeGenParams episode;
  FeaturizeParams featurize;
};

struct Benchmark {
  BenchmarkConfig cfg;
  Vocab vocab{20};
  Split train, val_seen, val_unseen;
  std::vector<CaptionExample> captions;  // stage-2 corpus
};

namespace detail {

inline Split build_split(const BenchmarkConfig& bc, const Vocab& vocab, int n_graphs,
                         int eps_per_graph, int class_lo, int class_hi, uint64_t seed_base) {
  Split split;
  for (int i = 0; i < n_graphs; ++i) {
    EnvGenParams gp = bc.env;
    gp.landmark_vocab_size = bc.landmark_vocab_size;
    gp.class_lo = class_lo;
    gp.class_hi = class_hi;
    uint64_t gseed = seed_base + static_cast<uint64_t>(i) * 1009;
    auto g = generate_environment(gseed, gp);
    auto eps = generate_episodes(g, i, eps_per_graph, vocab, gseed ^ 0xabcdull, bc.episode);
    split.graphs.push_back(FeaturizedGraph::build(std::move(g), bc.featurize, gseed ^ 0xf00dull));
    for (auto& e : eps) {
      e.id = static_cast<int>(split.episodes.size());
      split.episodes.push_back({i, std::move(e)});
    }
  }
  return split;
}

// caption template: "the <a> near the <b> ..." over the panorama's classes
inline std::vector<int> caption_for(const std::vector<int>& classes, const Vocab& v,
                                    std::mt19937_64& rng) {
  std::vector<int> toks;
  for (size_t i = 0; i < classes.size() && i < 3; ++i) {
    if (i > 0) toks.push_back(v.id(rng() % 2 ? "near" : "past"));
    toks.push_back(v.id("the"));
    toks.push_back(v.landmark_word(classes[i]));
  }
  return toks;
}

}  // namespace detail

// Environments are disjoint across splits (fresh seeds); the held-out
// landmark classes appear only in val-unseen panoramas, while the stage-2
// caption corpus covers the full class range (the web-data analog).
inline Benchmark build_benchmark(const BenchmarkConfig& bc) {
  Benchmark b;
  b.cfg = bc;
  b.vocab = Vocab(bc.landmark_vocab_size);
  const int c_total = bc.landmark_vocab_size;
  const int c_train = c_total - bc.held_out_classes;
  b.train = detail::build_split(bc, b.vocab, bc.n_train_graphs, bc.train_episodes_per_graph, 0,
                                c_train, bc.seed + 10000);
  b.val_seen = detail::build_split(bc, b.vocab, bc.n_val_seen_graphs,
                                   bc.val_seen_episodes_per_graph, 0, c_train, bc.seed + 20000);
  b.val_unseen = detail::build_split(bc, b.vocab, bc.n_val_unseen_graphs,
                                     bc.val_unseen_episodes_per_graph, 0, c_total,
                                     bc.seed + 30000);

  // stage-2 corpus: standalone panoramas over the FULL class range
  std::mt19937_64 rng(bc.seed + 40000);
  std::uniform_int_distribution<int> ucls(0, c_total - 1);
  std::uniform_real_distribution<double> uh(0.0, 2.0 * kPi), ue(-kPi / 4, kPi / 4);
  for (int i = 0; i < bc.n_captions; ++i) {
    NavGraph tiny;
    GraphNode n;
    n.id = 0;
    int k = 2 + static_cast<int>(rng() % 3);
    std::vector<int> classes;
    for (int j = 0; j < k; ++j) {
      Landmark lm;
      lm.cls = ucls(rng);
      lm.heading = uh(rng);
      lm.elevation = ue(rng);
      double cx = 0.3 + 0.4 * static_cast<double>(rng() % 100) / 100.0;
      lm.box = {cx - 0.1, 0.3, cx + 0.1, 0.55};
      n.landmarks.push_back(lm);
      classes.push_back(lm.cls);
    }
    tiny.nodes.push_back(n);
    tiny.rebuild_adjacency();
    CaptionExample ce;
    ce.pano = observe_panorama(tiny, 0, bc.featurize, bc.seed + 50000 + static_cast<uint64_t>(i));
    ce.caption = detail::caption_for(classes, b.vocab, rng);
    b.captions.push_back(std::move(ce));
  }
  return b;
}

// Mine candidate sets for every episode of a split.
inline std::vector<CandidateSet> mine_split(const Split& split, const Vocab& vocab,
                                            const FollowerPolicy& policy,
                                            const BeamSearchParams& bp = {}) {
  std::vector<CandidateSet> out;
  for (const auto& se : split.episodes) {
    auto cs = beam_search(policy, split.graphs[static_cast<size_t>(se.graph_index)].graph, se.spec,
                          vocab, bp);
    cs.episode_id = se.spec.id;
    out.push_back(std::move(cs));
  }
  return out;
}

}  // namespace pathrank
