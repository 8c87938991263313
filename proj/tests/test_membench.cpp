#include "lrf/membench.hpp"

#include <json.hpp>

#include <gtest/gtest.h>

#include <sstream>

using namespace lrf;

TEST(CountingAllocator, TracksLiveAndPeak) {
  StateCounter c;
  {
    CountedBuffer a(10, 0.0, CountingAllocator<double>(c));
    {
      CountedBuffer b(5, 0.0, CountingAllocator<double>(c));
      EXPECT_EQ(c.live(), 15u);
    }
    EXPECT_EQ(c.live(), 10u);
  }
  EXPECT_EQ(c.live(), 0u);
  EXPECT_EQ(c.peak(), 15u);
}

TEST(Profile, Examples) {
  EXPECT_EQ(profile(MemMode::ssa_v1, 16, 8, 0, TokenGrid(4, 4)).peak_state_values, 256);
  EXPECT_EQ(profile(MemMode::ssa_v2, 16, 512, 0, TokenGrid(4, 4)).peak_state_values, 262144);
  const MemProfile dyn = profile(MemMode::lrf_dyn, 16, 512, 8, TokenGrid(4, 4));
  EXPECT_EQ(dyn.peak_state_values, 4096);
  EXPECT_THROW(parse_mem_mode("ssa_v3"), std::domain_error);
}

TEST(Profile, CountedPeaksMatchClosedForms) {
  for (const MemMode mode : {MemMode::ssa_v1, MemMode::ssa_v2, MemMode::lrf_ssa_causal, MemMode::lrf_dyn}) {
    for (const Index n : {1, 16, 60, 64}) {
      const TokenGrid grid = TokenGrid::near_square(n);
      const MemProfile p = profile(mode, n, 12, 3, grid, {1, 3}, 5);
      EXPECT_EQ(p.peak_state_values, analytic_state_values(mode, n, 12, 3)) << to_string(mode) << " n=" << n;
      EXPECT_EQ(p.local_buffer_values, analytic_local_buffer_values(mode, grid, 12, 3))
          << to_string(mode) << " n=" << n;
      EXPECT_LE(p.batch_residual, 1e-9) << to_string(mode) << " n=" << n;
    }
  }
}

TEST(Profile, LocalBufferIsIndependentOfLength) {
  const Index a = profile(MemMode::lrf_dyn, 16 * 8, 8, 2, TokenGrid(16, 8)).local_buffer_values;
  const Index b = profile(MemMode::lrf_dyn, 64 * 8, 8, 2, TokenGrid(64, 8)).local_buffer_values;
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, 11 * 8 * 8);
}

TEST(Compare, RatiosTrackDOverK) {
  MemSweep sweep;
  sweep.ns = {16};
  sweep.ds = {64, 128, 256, 512};
  const CompareReport r = compare({MemMode::ssa_v2, MemMode::lrf_dyn}, sweep);
  ASSERT_EQ(r.ratios.size(), 4u);
  const double expect[] = {8, 16, 32, 64};
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(r.ratios[i].ratio, expect[i]);
  }
}

TEST(Compare, SingleModeOneRowPerConfig) {
  MemSweep sweep;
  sweep.ns = {16, 64};
  sweep.ds = {8, 16};
  const CompareReport r = compare({MemMode::ssa_v2}, sweep);
  EXPECT_EQ(r.rows.size(), 4u);
  EXPECT_TRUE(r.ratios.empty());
  EXPECT_THROW(compare({}, sweep), std::domain_error);
}

TEST(Compare, QuadraticGrowthForDenseScores) {
  MemSweep sweep;
  sweep.ns = {16, 64, 256, 1024};
  sweep.ds = {4};
  const CompareReport r = compare({MemMode::ssa_v1}, sweep);
  std::vector<double> x, y;
  for (const auto& row : r.rows) {
    x.push_back(static_cast<double>(row.n));
    y.push_back(static_cast<double>(row.peak_state_values));
  }
  EXPECT_NEAR(fit_loglog_slope(x, y), 2.0, 0.01);
}

TEST(Reports, JsonAndCsvRoundTrip) {
  MemSweep sweep;
  sweep.ns = {16};
  sweep.ds = {8};
  const CompareReport r = compare({MemMode::ssa_v1, MemMode::lrf_dyn}, sweep);
  const auto j = nlohmann::json::parse(to_json(r));
  EXPECT_EQ(j["schema_version"], kReportSchemaVersion);
  EXPECT_EQ(j["rows"].size(), 2u);
  EXPECT_EQ(j["rows"][0]["peak_state_values"], 256);
  EXPECT_EQ(j["ratios"][0]["numerator"], "ssa_v1");

  std::istringstream csv(to_csv(r));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "mode,n,d,k,peak_state_values,local_buffer_values,total,batch_residual");
  std::getline(csv, line);
  EXPECT_EQ(line.substr(0, 16), "ssa_v1,16,8,8,25");
}
