#pragma once

// Data-parallel inner loops of the boosting learners.
//
// Every kernel comes in a serial reference form and an OpenMP form. Parallel
// work is split so that each output cell is produced by exactly one thread
// running the serial loop order, so both forms return bit-identical results.

#include <cstddef>
#include <limits>
#include <span>

#include "balancetree/data.hpp"
#include "balancetree/tree.hpp"

namespace balancetree {

enum class Execution { serial, parallel };

/// Per-bin sufficient statistics for one (node, dimension, bin) cell.
/// mass0 sums w^-1 / n0 over sample-0 members, mass1 sums w / n1 over
/// sample-1 members; sq0/sq1 are the sums of their squares.
struct BinStats {
  double count0 = 0.0;
  double count1 = 0.0;
  double mass0 = 0.0;
  double mass1 = 0.0;
  double sq0 = 0.0;
  double sq1 = 0.0;

  double count() const { return count0 + count1; }
  BinStats& operator+=(const BinStats& o) {
    count0 += o.count0;
    count1 += o.count1;
    mass0 += o.mass0;
    mass1 += o.mass1;
    sq0 += o.sq0;
    sq1 += o.sq1;
    return *this;
  }
};

struct HistogramShape {
  std::size_t slots = 0;
  std::size_t dims = 0;
  std::size_t bins = 0;

  std::size_t size() const { return slots * dims * bins; }
  std::size_t offset(std::size_t slot, std::size_t dim) const { return (slot * dims + dim) * bins; }
};

enum class SplitCriterion {
  affinity,  // forward-stagewise: minimize the Hellinger affinity of the children
  variance,  // gradient boosting: minimize the pooled pseudo-residual sum of squares
};

struct SplitChoice {
  int dim = -1;
  int cut = -1;
  double score = std::numeric_limits<double>::infinity();
  BinStats left;
  BinStats right;

  bool found() const { return dim >= 0; }
};

/// slot0[i] / slot1[i] give the active node of each row, or -1 for rows that
/// no longer take part. `hist` must be zeroed and sized shape.size().
void accumulate_histograms(Execution exec, const BinnedData& data, std::span<const int> slot0,
                           std::span<const int> slot1, std::span<const double> mass0,
                           std::span<const double> mass1, HistogramShape shape,
                           std::span<BinStats> hist);

/// Totals of one slot, read from its first dimension.
BinStats slot_totals(std::span<const BinStats> hist, HistogramShape shape, std::size_t slot);

/// Score of a node that is not split: 1 for affinity, the residual sum of
/// squares for variance.
double unsplit_score(const BinStats& totals, SplitCriterion criterion);
double split_score(const BinStats& left, const BinStats& right, SplitCriterion criterion);

/// Best admissible split per slot. A split is admissible when both children
/// hold at least one row of each group and at least `min_leaf_total` rows.
/// Ties resolve to the lowest dimension, then the lowest cut.
void find_best_splits(Execution exec, std::span<const BinStats> hist, HistogramShape shape,
                      const CutGrid& grid, double min_leaf_total, SplitCriterion criterion,
                      std::span<SplitChoice> out);

/// out[i] += scale * tree(points.row(i)) for every tree.
void add_tree_values(Execution exec, std::span<const DecisionTree> trees, double scale,
                     const Sample& points, std::span<double> out);

}  // namespace balancetree
