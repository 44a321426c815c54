#include "balancetree/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "balancetree/error.hpp"

namespace balancetree {

Sample::Sample(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), values_(rows * cols, 0.0) {}

Sample::Sample(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows * cols) {
    throw DataError("sample buffer has " + std::to_string(values_.size()) + " values, expected " +
                    std::to_string(rows * cols));
  }
}

Sample Sample::select(std::span<const std::size_t> rows) const {
  Sample out(rows.size(), cols_);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto src = row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

Sample Sample::stack(const Sample& top, const Sample& bottom) {
  if (top.cols() != bottom.cols()) {
    throw DataError("cannot stack samples with " + std::to_string(top.cols()) + " and " +
                    std::to_string(bottom.cols()) + " columns");
  }
  std::vector<double> values(top.values_);
  values.insert(values.end(), bottom.values_.begin(), bottom.values_.end());
  return Sample(top.rows() + bottom.rows(), top.cols(), std::move(values));
}

namespace {

void check_finite(const Sample& s, const char* label) {
  for (std::size_t i = 0; i < s.rows(); ++i) {
    for (std::size_t j = 0; j < s.cols(); ++j) {
      if (!std::isfinite(s(i, j))) {
        throw DataError(std::string(label) + ": non-finite value at row " + std::to_string(i + 1) +
                        ", col " + std::to_string(j + 1));
      }
    }
  }
}

}  // namespace

TwoSampleDataset::TwoSampleDataset(Sample sample0, Sample sample1)
    : sample0_(std::move(sample0)), sample1_(std::move(sample1)) {
  if (sample0_.rows() == 0 || sample1_.rows() == 0) {
    throw DataError("both samples need at least one observation");
  }
  if (sample0_.cols() != sample1_.cols()) {
    throw DataError("dimension mismatch: sample 0 has " + std::to_string(sample0_.cols()) +
                    " columns, sample 1 has " + std::to_string(sample1_.cols()));
  }
  if (sample0_.cols() == 0) throw DataError("samples have no columns");
  check_finite(sample0_, "sample 0");
  check_finite(sample1_, "sample 1");
}

TwoSampleDataset TwoSampleDataset::subset(std::span<const std::size_t> rows0,
                                          std::span<const std::size_t> rows1) const {
  return {sample0_.select(rows0), sample1_.select(rows1)};
}

CutGrid::CutGrid(std::vector<std::vector<double>> cuts) : cuts_(std::move(cuts)) {
  for (std::size_t d = 0; d < cuts_.size(); ++d) {
    const auto& c = cuts_[d];
    if (c.empty()) throw DataError("cut grid dimension " + std::to_string(d) + " has no cuts");
    if (c.size() > 65534) throw DataError("too many cuts in dimension " + std::to_string(d));
    for (std::size_t k = 0; k < c.size(); ++k) {
      if (!std::isfinite(c[k]) || (k > 0 && !(c[k - 1] < c[k]))) {
        throw DataError("cuts in dimension " + std::to_string(d) + " are not strictly increasing");
      }
    }
  }
}

std::size_t CutGrid::max_bins() const {
  std::size_t m = 0;
  for (const auto& c : cuts_) m = std::max(m, c.size() + 1);
  return m;
}

std::uint16_t CutGrid::bin(std::size_t d, double value) const {
  const auto& c = cuts_[d];
  return static_cast<std::uint16_t>(std::lower_bound(c.begin(), c.end(), value) - c.begin());
}

CutGrid build_cut_grid(const TwoSampleDataset& data, int count_per_dim) {
  if (count_per_dim < 1) throw ConfigError("cuts per dimension must be >= 1");
  std::vector<std::vector<double>> cuts(data.dim());
  for (std::size_t d = 0; d < data.dim(); ++d) {
    double lo = data.sample0()(0, d);
    double hi = lo;
    for (int g = 0; g < 2; ++g) {
      const Sample& s = data.sample(g);
      for (std::size_t i = 0; i < s.rows(); ++i) {
        lo = std::min(lo, s(i, d));
        hi = std::max(hi, s(i, d));
      }
    }
    if (!(hi > lo)) {
      throw DataError("column " + std::to_string(d + 1) + " is constant over the pooled sample");
    }
    const double denom = static_cast<double>(count_per_dim) + 1.0;
    auto& c = cuts[d];
    c.reserve(static_cast<std::size_t>(count_per_dim));
    for (int k = 1; k <= count_per_dim; ++k) {
      double t = lo + static_cast<double>(k) * (hi - lo) / denom;
      if (!(t > lo && t < hi) || (!c.empty() && !(t > c.back()))) {
        throw DataError("column " + std::to_string(d + 1) +
                        " range is too narrow for the requested cut count");
      }
      c.push_back(t);
    }
  }
  return CutGrid(std::move(cuts));
}

BinnedSample::BinnedSample(const Sample& sample, const CutGrid& grid)
    : rows_(sample.rows()), dim_(sample.cols()), bins_(sample.rows() * sample.cols()) {
  if (grid.dim() != dim_) {
    throw DataError("grid has " + std::to_string(grid.dim()) + " dimensions, sample has " +
                    std::to_string(dim_));
  }
  for (std::size_t d = 0; d < dim_; ++d) {
    for (std::size_t i = 0; i < rows_; ++i) bins_[d * rows_ + i] = grid.bin(d, sample(i, d));
  }
}

std::string format_double(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

Sample read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<double> values;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    std::size_t count = 0;
    while (true) {
      auto comma = view.find(',');
      std::string_view cell = trim(view.substr(0, comma));
      if (!cell.empty() && cell.front() == '"' && cell.back() == '"' && cell.size() >= 2) {
        cell = trim(cell.substr(1, cell.size() - 2));
      }
      if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
      double v = 0.0;
      auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
        throw DataError(path.string() + ": non-numeric cell '" + std::string(cell) + "' at row " +
                        std::to_string(rows + 1) + ", col " + std::to_string(count + 1));
      }
      if (!std::isfinite(v)) {
        throw DataError(path.string() + ": non-finite value at row " + std::to_string(rows + 1) +
                        ", col " + std::to_string(count + 1));
      }
      values.push_back(v);
      ++count;
      if (comma == std::string_view::npos) break;
      view.remove_prefix(comma + 1);
    }
    if (rows == 0) {
      cols = count;
    } else if (count != cols) {
      throw DataError(path.string() + ": ragged row " + std::to_string(rows + 1) + " (line " +
                      std::to_string(line_no) + ") has " + std::to_string(count) +
                      " cells, expected " + std::to_string(cols));
    }
    ++rows;
  }
  if (rows == 0) throw DataError(path.string() + ": no data rows");
  return Sample(rows, cols, std::move(values));
}

void write_csv(const std::filesystem::path& path, const Sample& sample) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (std::size_t i = 0; i < sample.rows(); ++i) {
    for (std::size_t j = 0; j < sample.cols(); ++j) {
      if (j) out << ',';
      out << format_double(sample(i, j));
    }
    out << '\n';
  }
  if (!out) throw DataError("write failed for " + path.string());
}

namespace {

void reject_constant_columns(const TwoSampleDataset& data) {
  for (std::size_t d = 0; d < data.dim(); ++d) {
    const double first = data.sample0()(0, d);
    bool constant = true;
    for (int g = 0; g < 2 && constant; ++g) {
      const Sample& s = data.sample(g);
      for (std::size_t i = 0; i < s.rows(); ++i) {
        if (s(i, d) != first) {
          constant = false;
          break;
        }
      }
    }
    if (constant) {
      throw DataError("column " + std::to_string(d + 1) + " is constant over the pooled sample");
    }
  }
}

}  // namespace

TwoSampleDataset load_dataset(const std::filesystem::path& path0,
                              const std::filesystem::path& path1) {
  TwoSampleDataset data(read_csv(path0), read_csv(path1));
  reject_constant_columns(data);
  return data;
}

TwoSampleDataset load_labeled_dataset(const std::filesystem::path& path) {
  Sample all = read_csv(path);
  if (all.cols() < 2) throw DataError(path.string() + ": labeled file needs a feature and a label");
  const std::size_t dim = all.cols() - 1;
  std::vector<std::size_t> rows[2];
  for (std::size_t i = 0; i < all.rows(); ++i) {
    const double label = all(i, dim);
    if (label != 0.0 && label != 1.0) {
      throw DataError(path.string() + ": label at row " + std::to_string(i + 1) + " is not 0 or 1");
    }
    rows[label == 0.0 ? 0 : 1].push_back(i);
  }
  auto extract = [&](const std::vector<std::size_t>& idx) {
    Sample s(idx.size(), dim);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      for (std::size_t j = 0; j < dim; ++j) s(r, j) = all(idx[r], j);
    }
    return s;
  };
  TwoSampleDataset data(extract(rows[0]), extract(rows[1]));
  reject_constant_columns(data);
  return data;
}

}  // namespace balancetree
