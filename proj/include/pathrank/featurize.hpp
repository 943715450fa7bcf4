#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "pathrank/envgraph.hpp"

namespace pathrank {

// An image-region detection. Headings/elevations are absolute; the source
// perspective view center is kept so the centrality filter can be applied.
struct Region {
  std::vector<double> feature;            // dim d_v
  std::array<double, 4> box{0, 0, 1, 1};  // normalized x1,y1,x2,y2
  double heading = 0.0;
  double elevation = 0.0;
  double detection_score = 1.0;  // [0,1]
  int landmark_class = -1;       // synthetic ground truth
  double view_heading = 0.0;
  double view_elevation = 0.0;
};

struct PanoramaObservation {
  std::vector<Region> regions;
};

struct FeaturizeParams {
  int d_v = 64;
  int k_max = 8;
  double center_cutoff_rad = 20.0 * kPi / 180.0;
  double sim_threshold = 0.1;
  double feature_noise = 0.1;
};

// --- synthetic detector ---------------------------------------------------

// Deterministic unit-norm class embedding shared by every detection of a class.
inline std::vector<double> class_embedding(int cls, int d_v) {
  std::mt19937_64 rng(0xfeedull * 2654435761ull + static_cast<uint64_t>(cls));
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<double> v(static_cast<size_t>(d_v));
  double norm = 0;
  for (auto& x : v) {
    x = nd(rng);
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

// Emit raw detections for one node: each landmark appears in every perspective
// view (12 headings x 3 elevations) whose center is within the view window,
// giving the overlapping duplicates that dedup removes.
inline std::vector<Region> generate_raw_regions(const NavGraph& g, int node,
                                                const FeaturizeParams& fp, uint64_t seed) {
  const double view_h_step = 2.0 * kPi / 12.0;
  const double view_e[3] = {-kPi / 6.0, 0.0, kPi / 6.0};
  const double win_h = 40.0 * kPi / 180.0, win_e = 25.0 * kPi / 180.0;
  std::vector<Region> out;
  const auto& lms = g.nodes[node].landmarks;
  for (size_t li = 0; li < lms.size(); ++li) {
    const Landmark& lm = lms[li];
    auto base = class_embedding(lm.cls, fp.d_v);
    for (int vh = 0; vh < 12; ++vh) {
      double ch = vh * view_h_step;
      if (std::abs(wrap_pi(lm.heading - ch)) > win_h) continue;
      for (int ve = 0; ve < 3; ++ve) {
        if (std::abs(lm.elevation - view_e[ve]) > win_e) continue;
        std::mt19937_64 rng(seed ^ (static_cast<uint64_t>(node) << 40) ^
                            (static_cast<uint64_t>(li) << 20) ^
                            (static_cast<uint64_t>(vh * 3 + ve) << 4) ^ 0x5bull);
        std::normal_distribution<double> nd(0.0, fp.feature_noise);
        Region r;
        r.feature = base;
        for (auto& x : r.feature) x += nd(rng);
        r.box = lm.box;
        r.heading = lm.heading;
        r.elevation = lm.elevation;
        r.view_heading = ch;
        r.view_elevation = view_e[ve];
        double off = std::max(std::abs(wrap_pi(lm.heading - ch)),
                              std::abs(lm.elevation - view_e[ve]));
        r.detection_score =
            std::clamp(1.0 - 0.5 * off / win_h + 0.05 * nd(rng) / fp.feature_noise, 0.0, 1.0);
        r.landmark_class = lm.cls;
        out.push_back(std::move(r));
      }
    }
  }
  return out;
}

// --- dedup ----------------------------------------------------------------

inline double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0, na = 0, nb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  double d = std::sqrt(na) * std::sqrt(nb);
  return d == 0 ? 0.0 : dot / d;
}

// cosine distance plus absolute heading and elevation differences (radians);
// lower = more similar
inline double region_pair_distance(const Region& a, const Region& b) {
  return (1.0 - cosine_similarity(a.feature, b.feature)) +
         std::abs(wrap_pi(a.heading - b.heading)) + std::abs(a.elevation - b.elevation);
}

inline double view_center_offset(const Region& r) {
  return std::max(std::abs(wrap_pi(r.heading - r.view_heading)),
                  std::abs(r.elevation - r.view_elevation));
}

// Greedy dedup: (1) drop regions centered > cutoff from the center of their
// source view; (2) repeatedly discard the lower-scored member of the closest
// remaining pair until at most k_max regions remain and every surviving pair
// is at least sim_threshold apart. Ties break by lower score, then higher index.
inline PanoramaObservation dedup_regions(const std::vector<Region>& raw,
                                         const FeaturizeParams& fp) {
  std::vector<Region> kept;
  for (const auto& r : raw)
    if (view_center_offset(r) <= fp.center_cutoff_rad) kept.push_back(r);
  if (kept.empty() && !raw.empty()) {
    size_t best = 0;
    for (size_t i = 1; i < raw.size(); ++i)
      if (view_center_offset(raw[i]) < view_center_offset(raw[best])) best = i;
    kept.push_back(raw[best]);
  }
  std::vector<char> alive(kept.size(), 1);
  int count = static_cast<int>(kept.size());
  while (count > 1) {
    double best_d = std::numeric_limits<double>::infinity();
    int bi = -1, bj = -1;
    for (size_t i = 0; i < kept.size(); ++i) {
      if (!alive[i]) continue;
      for (size_t j = i + 1; j < kept.size(); ++j) {
        if (!alive[j]) continue;
        double d = region_pair_distance(kept[i], kept[j]);
        if (d < best_d) {
          best_d = d;
          bi = static_cast<int>(i);
          bj = static_cast<int>(j);
        }
      }
    }
    if (count <= fp.k_max && best_d >= fp.sim_threshold) break;
    // discard the lower-scored member; ties by higher index
    int victim;
    if (kept[static_cast<size_t>(bi)].detection_score <
        kept[static_cast<size_t>(bj)].detection_score)
      victim = bi;
    else if (kept[static_cast<size_t>(bj)].detection_score <
             kept[static_cast<size_t>(bi)].detection_score)
      victim = bj;
    else
      victim = std::max(bi, bj);
    alive[static_cast<size_t>(victim)] = 0;
    --count;
  }
  PanoramaObservation obs;
  for (size_t i = 0; i < kept.size(); ++i)
    if (alive[i]) obs.regions.push_back(kept[i]);
  return obs;
}

inline PanoramaObservation observe_panorama(const NavGraph& g, int node,
                                            const FeaturizeParams& fp, uint64_t seed) {
  return dedup_regions(generate_raw_regions(g, node, fp, seed), fp);
}

// --- spatial encoding -----------------------------------------------------

using SpatialVector = std::array<double, 11>;

// [x1, y1, x2, y2, area, cos e, sin e, cos h_cur, sin h_cur, cos h_next, sin h_next]
// with h_* the region heading relative to the current/next viewing direction.
inline SpatialVector spatial_vector(const Region& r, double heading_cur, double heading_next) {
  double hc = wrap_pi(r.heading - heading_cur);
  double hn = wrap_pi(r.heading - heading_next);
  return {r.box[0],
          r.box[1],
          r.box[2],
          r.box[3],
          (r.box[2] - r.box[0]) * (r.box[3] - r.box[1]),
          std::cos(r.elevation),
          std::sin(r.elevation),
          std::cos(hc),
          std::sin(hc),
          std::cos(hn),
          std::sin(hn)};
}

// final panorama has no next viewing direction; h_next := h_cur
inline SpatialVector last_step_spatial(const Region& r, double heading_cur) {
  return spatial_vector(r, heading_cur, heading_cur);
}

// --- multimodal sequence --------------------------------------------------

struct VisualToken {
  bool is_img = false;  // IMG delimiter vs region token
  int pano_index = 0;
  std::vector<double> feature;  // empty for IMG tokens
  SpatialVector spatial{};      // zeros for IMG tokens
  int landmark_class = -1;
};

// Token layout: <IMG> r(1).. <IMG> r(2).. | <CLS> w.. <SEP>
struct MultimodalSequence {
  std::vector<VisualToken> visual;
  std::vector<int> text;
  int n_panoramas = 0;

  int first_region_of_pano(int p) const {
    int seen = -1;
    for (size_t i = 0; i < visual.size(); ++i) {
      if (visual[i].is_img) ++seen;
      else if (seen == p) return static_cast<int>(i);
    }
    return -1;
  }
};

struct SequenceLimits {
  int n_max = 7;   // panoramas per trajectory
  int l_max = 60;  // instruction words
};

inline MultimodalSequence assemble_sequence(const Trajectory& traj,
                                            const std::vector<PanoramaObservation>& panos,
                                            const std::vector<int>& instruction_tokens,
                                            const SequenceLimits& lim = {}) {
  if (panos.size() != traj.nodes.size())
    throw std::invalid_argument("assemble_sequence: panorama count != trajectory length");
  if (static_cast<int>(panos.size()) > lim.n_max)
    throw std::length_error("assemble_sequence: trajectory exceeds N_max");
  if (static_cast<int>(instruction_tokens.size()) > lim.l_max)
    throw std::length_error("assemble_sequence: instruction exceeds L_max");
  MultimodalSequence seq;
  seq.n_panoramas = static_cast<int>(panos.size());
  for (size_t i = 0; i < panos.size(); ++i) {
    VisualToken img;
    img.is_img = true;
    img.pano_index = static_cast<int>(i);
    seq.visual.push_back(img);
    double h_cur = traj.poses[i].heading;
    double h_next = (i + 1 < panos.size()) ? traj.poses[i + 1].heading : h_cur;
    for (const Region& r : panos[i].regions) {
      VisualToken t;
      t.pano_index = static_cast<int>(i);
      t.feature = r.feature;
      t.spatial = spatial_vector(r, h_cur, h_next);
      t.landmark_class = r.landmark_class;
      seq.visual.push_back(std::move(t));
    }
  }
  seq.text.push_back(Vocab::kCls);
  for (int w : instruction_tokens) seq.text.push_back(w);
  seq.text.push_back(Vocab::kSep);
  return seq;
}

// panoramas for every node of a trajectory
inline std::vector<PanoramaObservation> observe_trajectory(const NavGraph& g, const Trajectory& t,
                                                           const FeaturizeParams& fp,
                                                           uint64_t seed) {
  std::vector<PanoramaObservation> panos;
  panos.reserve(t.nodes.size());
  for (int v : t.nodes) panos.push_back(observe_panorama(g, v, fp, seed));
  return panos;
}

}  // namespace pathrank
