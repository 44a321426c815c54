#include "balancetree/kernels.hpp"

#include <string>
#include <vector>

#include "balancetree/error.hpp"
#include "balancetree/loss.hpp"

namespace balancetree {

namespace {

void accumulate_dim(const BinnedData& data, std::span<const int> slot0, std::span<const int> slot1,
                    std::span<const double> mass0, std::span<const double> mass1,
                    HistogramShape shape, std::size_t d, BinStats* hist) {
  auto col0 = data.group[0].column(d);
  for (std::size_t i = 0; i < col0.size(); ++i) {
    const int s = slot0[i];
    if (s < 0) continue;
    BinStats& h = hist[shape.offset(static_cast<std::size_t>(s), d) + col0[i]];
    const double m = mass0[i];
    h.count0 += 1.0;
    h.mass0 += m;
    h.sq0 += m * m;
  }
  auto col1 = data.group[1].column(d);
  for (std::size_t i = 0; i < col1.size(); ++i) {
    const int s = slot1[i];
    if (s < 0) continue;
    BinStats& h = hist[shape.offset(static_cast<std::size_t>(s), d) + col1[i]];
    const double m = mass1[i];
    h.count1 += 1.0;
    h.mass1 += m;
    h.sq1 += m * m;
  }
}

// Best split of one (slot, dim) histogram row.
SplitChoice best_in_dim(const BinStats* row, std::size_t bins, std::size_t d,
                        double min_leaf_total, SplitCriterion criterion, BinStats* suffix) {
  suffix[bins] = BinStats{};
  for (std::size_t b = bins; b-- > 0;) {
    suffix[b] = suffix[b + 1];
    suffix[b] += row[b];
  }
  SplitChoice best;
  BinStats left;
  for (std::size_t c = 0; c + 1 < bins; ++c) {
    left += row[c];
    const BinStats& right = suffix[c + 1];
    if (left.count0 < 1.0 || left.count1 < 1.0 || right.count0 < 1.0 || right.count1 < 1.0) continue;
    if (left.count() < min_leaf_total || right.count() < min_leaf_total) continue;
    const double score = split_score(left, right, criterion);
    if (score < best.score) {
      best.dim = static_cast<int>(d);
      best.cut = static_cast<int>(c);
      best.score = score;
      best.left = left;
      best.right = right;
    }
  }
  return best;
}

}  // namespace

void accumulate_histograms(Execution exec, const BinnedData& data, std::span<const int> slot0,
                           std::span<const int> slot1, std::span<const double> mass0,
                           std::span<const double> mass1, HistogramShape shape,
                           std::span<BinStats> hist) {
  if (hist.size() != shape.size()) throw Error("histogram buffer has the wrong size");
  const auto dims = static_cast<long>(shape.dims);
  if (exec == Execution::parallel) {
#pragma omp parallel for schedule(static)
    for (long d = 0; d < dims; ++d) {
      accumulate_dim(data, slot0, slot1, mass0, mass1, shape, static_cast<std::size_t>(d), hist.data());
    }
  } else {
    for (long d = 0; d < dims; ++d) {
      accumulate_dim(data, slot0, slot1, mass0, mass1, shape, static_cast<std::size_t>(d), hist.data());
    }
  }
}

BinStats slot_totals(std::span<const BinStats> hist, HistogramShape shape, std::size_t slot) {
  BinStats t;
  const std::size_t base = shape.offset(slot, 0);
  for (std::size_t b = 0; b < shape.bins; ++b) t += hist[base + b];
  return t;
}

double unsplit_score(const BinStats& totals, SplitCriterion criterion) {
  if (criterion == SplitCriterion::affinity) return 1.0;
  const double sum = totals.mass0 - totals.mass1;
  return (totals.sq0 + totals.sq1) - sum * sum / totals.count();
}

double split_score(const BinStats& left, const BinStats& right, SplitCriterion criterion) {
  if (criterion == SplitCriterion::affinity) {
    return hellinger_split_score(left.mass0, left.mass1, right.mass0, right.mass1);
  }
  // Pseudo-residuals are +mass for sample 0 and -mass for sample 1.
  const double sl = left.mass0 - left.mass1;
  const double sr = right.mass0 - right.mass1;
  return ((left.sq0 + left.sq1) - sl * sl / left.count()) +
         ((right.sq0 + right.sq1) - sr * sr / right.count());
}

void find_best_splits(Execution exec, std::span<const BinStats> hist, HistogramShape shape,
                      const CutGrid& grid, double min_leaf_total, SplitCriterion criterion,
                      std::span<SplitChoice> out) {
  if (out.size() != shape.slots) throw Error("split output has the wrong size");
  std::vector<SplitChoice> per_cell(shape.slots * shape.dims);
  const auto cells = static_cast<long>(per_cell.size());
  auto score_cell = [&](long cell, std::vector<BinStats>& suffix) {
    const auto slot = static_cast<std::size_t>(cell) / shape.dims;
    const auto d = static_cast<std::size_t>(cell) % shape.dims;
    per_cell[static_cast<std::size_t>(cell)] =
        best_in_dim(hist.data() + shape.offset(slot, d), grid.bins(d), d, min_leaf_total, criterion,
                    suffix.data());
  };
  if (exec == Execution::parallel) {
#pragma omp parallel
    {
      std::vector<BinStats> suffix(shape.bins + 1);
#pragma omp for schedule(dynamic)
      for (long cell = 0; cell < cells; ++cell) score_cell(cell, suffix);
    }
  } else {
    std::vector<BinStats> suffix(shape.bins + 1);
    for (long cell = 0; cell < cells; ++cell) score_cell(cell, suffix);
  }
  for (std::size_t slot = 0; slot < shape.slots; ++slot) {
    SplitChoice best;
    for (std::size_t d = 0; d < shape.dims; ++d) {
      const SplitChoice& c = per_cell[slot * shape.dims + d];
      if (c.found() && c.score < best.score) best = c;
    }
    out[slot] = best;
  }
}

void add_tree_values(Execution exec, std::span<const DecisionTree> trees, double scale,
                     const Sample& points, std::span<double> out) {
  if (out.size() != points.rows()) throw Error("prediction buffer has the wrong size");
  for (const DecisionTree& t : trees) {
    if (t.input_dim() != points.cols()) {
      throw DataError("points have " + std::to_string(points.cols()) + " columns, model expects " +
                      std::to_string(t.input_dim()));
    }
  }
  const auto rows = static_cast<long>(points.rows());
  auto one = [&](long i) {
    const auto row = points.row(static_cast<std::size_t>(i));
    double sum = 0.0;
    for (const DecisionTree& t : trees) sum += t.evaluate(row);
    out[static_cast<std::size_t>(i)] += scale * sum;
  };
  if (exec == Execution::parallel) {
#pragma omp parallel for schedule(static)
    for (long i = 0; i < rows; ++i) one(i);
  } else {
    for (long i = 0; i < rows; ++i) one(i);
  }
}

}  // namespace balancetree
