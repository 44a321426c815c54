#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <limits>

#include "balancetree/data.hpp"
#include "balancetree/error.hpp"
#include "test_util.hpp"

using namespace balancetree;

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

TwoSampleDataset column_pair(std::vector<double> a, std::vector<double> b) {
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  return {Sample(na, 1, std::move(a)), Sample(nb, 1, std::move(b))};
}

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("cut grid is equally spaced over the pooled range") {
    auto grid = build_cut_grid(column_pair({0.0, 1.5}, {4.0, 2.0}), 3);
    REQUIRE(grid.count(0) == 3);
    CHECK(grid.cuts(0)[0] == doctest::Approx(1.0));
    CHECK(grid.cuts(0)[1] == doctest::Approx(2.0));
    CHECK(grid.cuts(0)[2] == doctest::Approx(3.0));

    grid = build_cut_grid(column_pair({0.0, 32.0}, {16.0}), 31);
    REQUIRE(grid.count(0) == 31);
    for (int k = 0; k < 31; ++k) CHECK(grid.cuts(0)[static_cast<std::size_t>(k)] == doctest::Approx(k + 1.0));
  }

  TEST_CASE("cut grid ignores row order and is shared by both groups") {
    const auto data = testutil::shifted_pair(50, 40, 3, 1.0, 7);
    const auto grid = build_cut_grid(data);
    std::vector<std::size_t> rev0(data.n0());
    std::vector<std::size_t> rev1(data.n1());
    for (std::size_t i = 0; i < rev0.size(); ++i) rev0[i] = rev0.size() - 1 - i;
    for (std::size_t i = 0; i < rev1.size(); ++i) rev1[i] = rev1.size() - 1 - i;
    CHECK(build_cut_grid(data.subset(rev0, rev1)) == grid);
    CHECK(build_cut_grid(data.swapped()) == grid);
    for (std::size_t d = 0; d < grid.dim(); ++d) {
      CHECK(grid.count(d) == 31);
      CHECK(std::is_sorted(grid.cuts(d).begin(), grid.cuts(d).end()));
    }
  }

  TEST_CASE("bin index counts cuts strictly below the value") {
    const CutGrid grid(std::vector<std::vector<double>>{{1.0, 2.0, 3.0}});
    CHECK(grid.bin(0, 0.5) == 0);
    CHECK(grid.bin(0, 1.0) == 0);  // equal to a cut: same side as x <= threshold
    CHECK(grid.bin(0, 1.5) == 1);
    CHECK(grid.bin(0, 3.0) == 2);
    CHECK(grid.bin(0, 7.0) == 3);
  }

  TEST_CASE("constant columns and invalid grids are rejected") {
    CHECK_THROWS_AS(build_cut_grid(column_pair({1.0, 1.0}, {1.0})), DataError);
    CHECK_THROWS_AS(CutGrid(std::vector<std::vector<double>>{{1.0, 1.0}}), DataError);
    CHECK_THROWS_AS(CutGrid(std::vector<std::vector<double>>{std::vector<double>{}}), DataError);
    CHECK_THROWS_AS(build_cut_grid(column_pair({0.0}, {1.0}), 0), ConfigError);
  }

  TEST_CASE("dataset validation") {
    CHECK_THROWS_AS(TwoSampleDataset(Sample(0, 2), Sample(3, 2)), DataError);
    CHECK_THROWS_AS(TwoSampleDataset(Sample(2, 2), Sample(3, 3)), DataError);
    Sample bad(2, 1);
    bad(1, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_WITH_AS(TwoSampleDataset(bad, Sample(1, 1)), doctest::Contains("non-finite"), DataError);

    const auto data = testutil::shifted_pair(6, 4, 2, 0.0, 1);
    CHECK(data.n() == 10);
    CHECK(data.zeta() == doctest::Approx(0.6));
    CHECK(data.pooled().rows() == 10);
    CHECK(data.pooled().row(6)[0] == data.sample1()(0, 0));
    CHECK(data.swapped().sample0() == data.sample1());
  }

  TEST_CASE("binned samples follow the grid") {
    const auto data = testutil::shifted_pair(30, 20, 2, 1.0, 3);
    const auto grid = build_cut_grid(data, 7);
    const BinnedData bins(data, grid);
    for (std::size_t i = 0; i < data.n1(); ++i) {
      for (std::size_t d = 0; d < 2; ++d) CHECK(bins.group[1](i, d) == grid.bin(d, data.sample1()(i, d)));
    }
  }

  TEST_CASE("csv round trip is exact") {
    testutil::TempDir dir("csv");
    const auto s = testutil::gaussian_sample(25, 3, 0.0, 11);
    write_csv(dir / "s.csv", s);
    CHECK(read_csv(dir / "s.csv") == s);
  }

  TEST_CASE("csv reader handles comments, quotes and signs") {
    testutil::TempDir dir("csvfmt");
    write_text(dir / "a.csv", "# comment\n1,\"2.5\"\n\n+3,-4e-1\n");
    const Sample s = read_csv(dir / "a.csv");
    REQUIRE(s.rows() == 2);
    CHECK(s(0, 1) == 2.5);
    CHECK(s(1, 0) == 3.0);
    CHECK(s(1, 1) == -0.4);
  }

  TEST_CASE("csv reader reports malformed input") {
    testutil::TempDir dir("csvbad");
    write_text(dir / "text.csv", "1,2\n3,abc\n");
    CHECK_THROWS_WITH_AS(read_csv(dir / "text.csv"), doctest::Contains("non-numeric"), DataError);
    write_text(dir / "ragged.csv", "1,2\n3\n");
    CHECK_THROWS_WITH_AS(read_csv(dir / "ragged.csv"), doctest::Contains("ragged"), DataError);
    write_text(dir / "inf.csv", "1,inf\n");
    CHECK_THROWS_WITH_AS(read_csv(dir / "inf.csv"), doctest::Contains("non-finite"), DataError);
    write_text(dir / "empty.csv", "# nothing\n");
    CHECK_THROWS_WITH_AS(read_csv(dir / "empty.csv"), doctest::Contains("no data rows"), DataError);
    CHECK_THROWS_AS(read_csv(dir / "missing.csv"), DataError);
  }

  TEST_CASE("labeled files split on the last column") {
    testutil::TempDir dir("labeled");
    write_text(dir / "l.csv", "0.5,0\n1.5,1\n2.5,0\n");
    const auto data = load_labeled_dataset(dir / "l.csv");
    CHECK(data.n0() == 2);
    CHECK(data.n1() == 1);
    CHECK(data.sample1()(0, 0) == 1.5);
    write_text(dir / "bad.csv", "0.5,2\n1.5,1\n");
    CHECK_THROWS_AS(load_labeled_dataset(dir / "bad.csv"), DataError);
  }
}
