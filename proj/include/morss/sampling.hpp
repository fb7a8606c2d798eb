#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "morss/common.hpp"
#include "morss/rng.hpp"

namespace morss {

// ---------------------------------------------------------------------------
// Ranked-set sampling with several imperfect rankers.
//
// Units are drawn in cycles. Each cycle lays out H sets of H units; in set r
// every available observer scores the H units, the scores are turned into
// per-observer rank weight matrices (ties allowed), the matrices are blended
// with correlation-proportional weights, and the unit whose blended weight is
// largest for the target rank is the one actually measured. One cycle thus
// measures H units (the r-th judged order statistic from set r), and n cycles
// yield a sample of n*H measurements out of n*H*H inspected units.
// ---------------------------------------------------------------------------

enum class Scheme {
  Srs,  // simple random sample, no ranking
  Rss,  // ranked-set sample, first observer only
  Mrs,  // ranked-set sample, all observers blended
  Mmr,  // median ranked-set sample, all observers blended
};

inline const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::Srs: return "srs";
    case Scheme::Rss: return "rss";
    case Scheme::Mrs: return "mrs";
    case Scheme::Mmr: return "mmr";
  }
  return "srs";
}

struct SchemeSpec {
  Scheme scheme = Scheme::Srs;
  int set_size = 1;   // H: units per set, sets per cycle, ranks available
  int cycles = 1;     // n
  double tie_c = 1.0; // discretisation width of the perception model
  // Rank correlation of each participating observer with the true order.
  // Ignored for Srs; Rss uses exactly one entry.
  std::vector<double> observer_correlations;

  int sample_size() const { return set_size * cycles; }
  // Units inspected per cycle (ranked schemes look at H sets of H units).
  int units_per_cycle() const { return set_size * set_size; }
};

// A finite collection of units the schemes draw from.
struct Population {
  Eigen::MatrixXd predictors;  // units x p
  Eigen::VectorXd response;    // units
  Eigen::MatrixXd observers;   // units x K, observer scores per unit
  ResponseKind kind = ResponseKind::Continuous;

  Eigen::Index size() const { return response.size(); }
};

// Row-stochastic H x H matrix; entry (u, r) is the weight a ranker assigns to
// "unit u occupies rank position r" within one set.
using WeightMatrix = Eigen::MatrixXd;

// Per-measurement bookkeeping kept alongside the drawn dataset.
struct DrawInfo {
  int cycle = 0;          // cycle index, 0-based
  int set = 0;            // set index within the cycle, 0-based
  int measured_rank = 0;  // judged rank that was measured, 1-based
  double weight = 0.0;    // blended weight of the selected unit at that rank
};

struct RankedSample {
  Dataset dataset;
  SchemeSpec spec;
  // One entry per dataset row for ranked schemes; empty for Srs, where no
  // rank judgement takes place.
  std::vector<DrawInfo> draws;
};

// ---------------------------------------------------------------------------
// Rank-weight construction.
// ---------------------------------------------------------------------------

// Partitions units 0..H-1 into tie groups under the discretised perception
// model: two scores are indistinguishable iff floor(score / c) agrees. Groups
// are returned in ascending perceived order; within a group the original
// indices stay in ascending order.
inline std::vector<std::vector<int>> dps_tied_ranks(const Eigen::VectorXd& scores,
                                                    double c) {
  if (!(c > 0.0)) throw InvalidInputError("tie width c must be positive");
  const int h = static_cast<int>(scores.size());
  if (h == 0) throw InvalidInputError("cannot rank an empty score vector");
  std::vector<double> bucket(h);
  for (int i = 0; i < h; ++i) {
    if (!std::isfinite(scores[i]))
      throw InvalidInputError("observer score is not finite");
    bucket[i] = std::floor(scores[i] / c);
  }
  std::vector<int> order(h);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return bucket[a] < bucket[b]; });
  std::vector<std::vector<int>> groups;
  for (int i = 0; i < h;) {
    int j = i;
    while (j < h && bucket[order[j]] == bucket[order[i]]) ++j;
    groups.emplace_back(order.begin() + i, order.begin() + j);
    i = j;
  }
  return groups;
}

// Weight matrix of a single observer. A tie group of size m occupies m
// consecutive rank positions and each member gets weight 1/m on each of them,
// so every row sums to one and so does every column.
inline WeightMatrix observer_weight_matrix(const Eigen::VectorXd& scores,
                                           double c) {
  const auto groups = dps_tied_ranks(scores, c);
  const int h = static_cast<int>(scores.size());
  WeightMatrix w = WeightMatrix::Zero(h, h);
  int pos = 0;
  for (const auto& g : groups) {
    const int m = static_cast<int>(g.size());
    const double share = 1.0 / static_cast<double>(m);
    for (int u : g)
      for (int r = pos; r < pos + m; ++r) w(u, r) = share;
    pos += m;
  }
  return w;
}

// Blends per-observer weight matrices proportionally to the magnitude of each
// observer's rank correlation. A convex combination of row-stochastic
// matrices, so the result is row-stochastic as well.
inline WeightMatrix combine_weights(const std::vector<WeightMatrix>& mats,
                                    const std::vector<double>& correlations) {
  if (mats.empty() || mats.size() != correlations.size())
    throw InvalidInputError("need one correlation per weight matrix");
  double total = 0.0;
  for (double rho : correlations) {
    if (!std::isfinite(rho)) throw InvalidInputError("correlation is not finite");
    total += std::abs(rho);
  }
  if (total <= 0.0)
    throw InvalidInputError("all observer correlations are zero");
  const Eigen::Index h = mats.front().rows();
  WeightMatrix combined = WeightMatrix::Zero(h, h);
  for (std::size_t k = 0; k < mats.size(); ++k) {
    if (mats[k].rows() != h || mats[k].cols() != h)
      throw InvalidInputError("weight matrices differ in size");
    combined += (std::abs(correlations[k]) / total) * mats[k];
  }
  return combined;
}

// Picks the unit to measure for rank position `rank_pos` (0-based): the row
// with the largest blended weight in that column, lowest index on ties.
inline int select_unit(const WeightMatrix& combined, int rank_pos) {
  const int h = static_cast<int>(combined.rows());
  if (rank_pos < 0 || rank_pos >= h)
    throw InvalidInputError("rank position out of range");
  int best = 0;
  double best_w = combined(0, rank_pos);
  for (int u = 1; u < h; ++u) {
    if (combined(u, rank_pos) > best_w) {
      best_w = combined(u, rank_pos);
      best = u;
    }
  }
  return best;
}

namespace detail {

inline void validate_scheme(const Population& pop, const SchemeSpec& spec) {
  if (spec.set_size < 1) throw InvalidInputError("set size must be >= 1");
  if (spec.cycles < 1) throw InvalidInputError("cycle count must be >= 1");
  if (!(spec.tie_c > 0.0)) throw InvalidInputError("tie width c must be positive");
  if (pop.response.size() != pop.predictors.rows())
    throw InvalidInputError("population response/predictor sizes disagree");
  if (spec.scheme == Scheme::Srs) return;
  const auto k = static_cast<Eigen::Index>(spec.observer_correlations.size());
  if (k < 1) throw InvalidInputError("ranked schemes need at least one observer");
  if (spec.scheme == Scheme::Rss && k != 1)
    throw InvalidInputError("single-ranker scheme takes exactly one observer");
  if (pop.observers.cols() < k)
    throw InvalidInputError("population carries fewer observer columns than requested");
  if (pop.observers.rows() != pop.response.size())
    throw InvalidInputError("observer scores do not cover the population");
}

// 0-based judged rank to measure for draw (cycle j, set r).
// Non-median schemes take rank r. The median scheme takes the middle rank for
// odd H; for even H the first half of all n*H draws (cycle-major order) takes
// rank H/2 and the second half rank H/2 + 1 (1-based), balancing the two
// central order statistics across the sample.
inline int target_rank(const SchemeSpec& spec, int cycle, int set) {
  if (spec.scheme != Scheme::Mmr) return set;
  const int h = spec.set_size;
  if (h % 2 == 1) return (h - 1) / 2;
  const int draw_index = cycle * h + set;
  const int total = spec.cycles * h;
  return draw_index < total / 2 ? h / 2 - 1 : h / 2;
}

// One ranked measurement from the units listed in `members` (indices into
// pop). Appends the selected unit's data row and bookkeeping.
inline void measure_set(const Population& pop, const SchemeSpec& spec,
                        const std::vector<int>& members, int cycle, int set,
                        Dataset& out, Eigen::Index row,
                        std::vector<DrawInfo>& draws) {
  const int h = spec.set_size;
  const auto n_obs = static_cast<int>(spec.observer_correlations.size());
  std::vector<WeightMatrix> mats;
  mats.reserve(n_obs);
  Eigen::VectorXd scores(h);
  for (int k = 0; k < n_obs; ++k) {
    for (int i = 0; i < h; ++i) scores[i] = pop.observers(members[i], k);
    mats.push_back(observer_weight_matrix(scores, spec.tie_c));
  }
  const WeightMatrix combined =
      combine_weights(mats, spec.observer_correlations);
  const int rank = target_rank(spec, cycle, set);
  const int sel = select_unit(combined, rank);
  const int unit = members[sel];
  out.X.row(row) = pop.predictors.row(unit);
  out.y[row] = pop.response[unit];
  draws.push_back({cycle, set, rank + 1, combined(sel, rank)});
}

}  // namespace detail

// Draws a sample under `spec`, with fresh without-replacement randomisation
// from `seed`. Every cycle of a ranked scheme partitions H*H freshly drawn
// units into H sets, so no unit is inspected twice within a cycle.
inline RankedSample draw_sample(const Population& pop, const SchemeSpec& spec,
                                std::uint64_t seed) {
  detail::validate_scheme(pop, spec);
  const int h = spec.set_size;
  const Eigen::Index total = pop.size();
  RankedSample out;
  out.spec = spec;
  out.dataset.kind = pop.kind;
  out.dataset.X.resize(spec.sample_size(), pop.predictors.cols());
  out.dataset.y.resize(spec.sample_size());
  Rng rng(seed);

  if (spec.scheme == Scheme::Srs || h == 1) {
    // Sets of one involve no ranking, so H = 1 ranked schemes coincide with
    // simple random sampling draw for draw at equal seeds.
    const Eigen::Index need = spec.sample_size();
    if (total < need)
      throw InsufficientPopulationError("population smaller than sample size");
    // Partial Fisher-Yates over the unit indices.
    std::vector<Eigen::Index> idx(total);
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    for (Eigen::Index i = 0; i < need; ++i) {
      const auto j = i + static_cast<Eigen::Index>(
                             rng.bounded(static_cast<std::uint64_t>(total - i)));
      std::swap(idx[i], idx[j]);
      out.dataset.X.row(i) = pop.predictors.row(idx[i]);
      out.dataset.y[i] = pop.response[idx[i]];
      if (spec.scheme != Scheme::Srs)
        out.draws.push_back({static_cast<int>(i), 0, 1, 1.0});
    }
    return out;
  }

  const Eigen::Index per_cycle = spec.units_per_cycle();
  if (total < per_cycle)
    throw InsufficientPopulationError(
        "population smaller than one cycle of sets (" +
        std::to_string(per_cycle) + " units)");
  std::vector<Eigen::Index> idx(total);
  std::vector<int> members(h);
  Eigen::Index row = 0;
  for (int cycle = 0; cycle < spec.cycles; ++cycle) {
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    for (Eigen::Index i = 0; i < per_cycle; ++i) {
      const auto j = i + static_cast<Eigen::Index>(
                             rng.bounded(static_cast<std::uint64_t>(total - i)));
      std::swap(idx[i], idx[j]);
    }
    for (int set = 0; set < h; ++set) {
      for (int i = 0; i < h; ++i)
        members[i] = static_cast<int>(idx[set * h + i]);
      detail::measure_set(pop, spec, members, cycle, set, out.dataset, row++,
                          out.draws);
    }
  }
  return out;
}

// Variant for populations whose rows are already independent draws in random
// order (simulation use): consumes consecutive blocks instead of shuffling,
// so a scheme uses exactly cycles*H*H distinct units (or n*H for Srs) and
// never re-inspects a unit across cycles.
inline RankedSample draw_sample_sequential(const Population& pop,
                                           const SchemeSpec& spec) {
  detail::validate_scheme(pop, spec);
  const int h = spec.set_size;
  RankedSample out;
  out.spec = spec;
  out.dataset.kind = pop.kind;
  out.dataset.X.resize(spec.sample_size(), pop.predictors.cols());
  out.dataset.y.resize(spec.sample_size());

  if (spec.scheme == Scheme::Srs) {
    if (pop.size() < spec.sample_size())
      throw InsufficientPopulationError("population smaller than sample size");
    out.dataset.X = pop.predictors.topRows(spec.sample_size());
    out.dataset.y = pop.response.head(spec.sample_size());
    return out;
  }

  const Eigen::Index need =
      static_cast<Eigen::Index>(spec.cycles) * spec.units_per_cycle();
  if (pop.size() < need)
    throw InsufficientPopulationError("population smaller than " +
                                      std::to_string(need) + " units");
  std::vector<int> members(h);
  Eigen::Index row = 0;
  Eigen::Index next = 0;
  for (int cycle = 0; cycle < spec.cycles; ++cycle) {
    for (int set = 0; set < h; ++set) {
      for (int i = 0; i < h; ++i) members[i] = static_cast<int>(next++);
      detail::measure_set(pop, spec, members, cycle, set, out.dataset, row++,
                          out.draws);
    }
  }
  return out;
}

}  // namespace morss
