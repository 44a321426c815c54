#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace balancetree {

/// Dense row-major matrix of observations (rows) by features (columns).
class Sample {
 public:
  Sample() = default;
  Sample(std::size_t rows, std::size_t cols);
  Sample(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * cols_, cols_};
  }
  std::span<double> row(std::size_t i) { return {values_.data() + i * cols_, cols_}; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values_[i * cols_ + j]; }

  std::span<const double> values() const { return values_; }

  /// Rows selected by index, in the given order.
  Sample select(std::span<const std::size_t> rows) const;

  /// Vertical concatenation; column counts must agree.
  static Sample stack(const Sample& top, const Sample& bottom);

  friend bool operator==(const Sample&, const Sample&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

/// Sample 0 is drawn from P (numerator density), sample 1 from Q.
class TwoSampleDataset {
 public:
  /// Validates n0, n1 >= 1, equal column counts and finite entries.
  TwoSampleDataset(Sample sample0, Sample sample1);

  const Sample& sample0() const { return sample0_; }
  const Sample& sample1() const { return sample1_; }
  const Sample& sample(int group) const { return group == 0 ? sample0_ : sample1_; }

  std::size_t n0() const { return sample0_.rows(); }
  std::size_t n1() const { return sample1_.rows(); }
  std::size_t n() const { return n0() + n1(); }
  std::size_t dim() const { return sample0_.cols(); }
  /// n0 / n
  double zeta() const { return static_cast<double>(n0()) / static_cast<double>(n()); }

  /// Both samples stacked, group 0 first.
  Sample pooled() const { return Sample::stack(sample0_, sample1_); }

  /// Roles of P and Q exchanged.
  TwoSampleDataset swapped() const { return {sample1_, sample0_}; }

  TwoSampleDataset subset(std::span<const std::size_t> rows0,
                          std::span<const std::size_t> rows1) const;

 private:
  Sample sample0_;
  Sample sample1_;
};

/// Per-dimension split thresholds shared by every tree.
class CutGrid {
 public:
  static constexpr int kDefaultCount = 31;

  CutGrid() = default;
  /// Takes explicit thresholds; each row must be strictly increasing.
  explicit CutGrid(std::vector<std::vector<double>> cuts);

  std::size_t dim() const { return cuts_.size(); }
  std::span<const double> cuts(std::size_t d) const { return cuts_[d]; }
  std::size_t count(std::size_t d) const { return cuts_[d].size(); }
  /// Number of bins in dimension d (cuts + 1).
  std::size_t bins(std::size_t d) const { return cuts_[d].size() + 1; }
  std::size_t max_bins() const;

  /// Index of the bin containing value: the number of cuts strictly below it.
  /// A split at cut c sends bins 0..c left, matching the `value <= cuts[c]` rule.
  std::uint16_t bin(std::size_t d, double value) const;

  const std::vector<std::vector<double>>& all() const { return cuts_; }

  friend bool operator==(const CutGrid&, const CutGrid&) = default;

 private:
  std::vector<std::vector<double>> cuts_;
};

/// Equally spaced strictly interior cuts over the pooled range of each dimension.
CutGrid build_cut_grid(const TwoSampleDataset& data, int count_per_dim = CutGrid::kDefaultCount);

/// A sample discretized against a CutGrid, stored column-major (one column per feature).
class BinnedSample {
 public:
  BinnedSample() = default;
  BinnedSample(const Sample& sample, const CutGrid& grid);

  std::size_t rows() const { return rows_; }
  std::size_t dim() const { return dim_; }
  std::span<const std::uint16_t> column(std::size_t d) const {
    return {bins_.data() + d * rows_, rows_};
  }
  std::uint16_t operator()(std::size_t row, std::size_t d) const { return bins_[d * rows_ + row]; }

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<std::uint16_t> bins_;
};

struct BinnedData {
  BinnedData() = default;
  BinnedData(const TwoSampleDataset& data, const CutGrid& grid)
      : group{BinnedSample(data.sample0(), grid), BinnedSample(data.sample1(), grid)} {}

  BinnedSample group[2];
};

// CSV: headerless, one observation per row, '.' decimal separator.
// Lines starting with '#' and blank lines are skipped.

Sample read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const Sample& sample);
/// Shortest round-trip decimal representation.
std::string format_double(double value);

/// Two files, one per group. Rejects ragged rows, non-numeric or non-finite
/// cells, mismatched dimensions and pooled-constant columns.
TwoSampleDataset load_dataset(const std::filesystem::path& path0,
                              const std::filesystem::path& path1);

/// One file whose trailing column is a 0/1 group label.
TwoSampleDataset load_labeled_dataset(const std::filesystem::path& path);

}  // namespace balancetree
