#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "georeg/match_filter.hpp"
#include "georeg/parallel.hpp"
#include "test_support.hpp"

namespace georeg {
namespace {

using testing::TempDir;

void expect_code(ErrorCode code, const std::function<void()>& f) {
  try {
    f();
    ADD_FAILURE() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

Raster constant(int h, int w, float v) {
  return Raster(h, w, Semantic::kConfidence1, std::vector<float>(static_cast<std::size_t>(h * w), v),
                std::nullopt);
}

// Flow on an h x w image whose value at (r, c) is f(r, c).
Raster flow(int h, int w, const std::function<std::pair<double, double>(int, int)>& f) {
  Raster out(h, w, Semantic::kFlow2, -9999.0f);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const auto [y, x] = f(r, c);
      out.at(r, c, 0) = static_cast<float>(y);
      out.at(r, c, 1) = static_cast<float>(x);
    }
  }
  return out;
}

FlowPair shift_pair(int h, int w, double fwd_dx, double bwd_dx) {
  FlowPair fp;
  fp.forward = flow(h, w, [&](int r, int c) { return std::pair{double(r), c + fwd_dx}; });
  fp.backward = flow(h, w, [&](int r, int c) { return std::pair{double(r), c + bwd_dx}; });
  fp.conf_forward = constant(h, w, 1.0f);
  fp.conf_backward = constant(h, w, 1.0f);
  return fp;
}

TEST(CyclicResiduals, IdentityIsZero) {
  const Raster res = cyclic_residuals(shift_pair(20, 30, 0, 0));
  for (int r = 0; r < 20; ++r) {
    for (int c = 0; c < 30; ++c) EXPECT_EQ(res.at(r, c), 0.0f);
  }
}

TEST(CyclicResiduals, ExactInverseShiftIsZero) {
  const Raster res = cyclic_residuals(shift_pair(20, 30, 3, -3));
  for (int r = 0; r < 20; ++r) {
    for (int c = 0; c < 27; ++c) EXPECT_EQ(res.at(r, c), 0.0f);
    for (int c = 27; c < 30; ++c) EXPECT_FALSE(res.pixel_valid(r, c));  // lands outside B
  }
}

TEST(CyclicResiduals, MismatchedShiftGivesTwo) {
  const Raster res = cyclic_residuals(shift_pair(20, 30, 3, -1));
  for (int r = 0; r < 20; ++r) {
    for (int c = 0; c < 27; ++c) EXPECT_EQ(res.at(r, c), 2.0f);
  }
}

TEST(CyclicResiduals, SmoothInverseBelowMicroPixel) {
  // Forward halves coordinates; values are exact in float32.
  FlowPair fp;
  fp.forward = flow(40, 40, [](int r, int c) { return std::pair{0.5 * r + 2.0, 0.5 * c + 3.0}; });
  fp.backward = flow(30, 30, [](int r, int c) { return std::pair{2.0 * (r - 2.0), 2.0 * (c - 3.0)}; });
  fp.conf_forward = constant(40, 40, 1);
  fp.conf_backward = constant(30, 30, 1);
  const Raster res = cyclic_residuals(fp);
  for (int r = 0; r < 40; ++r) {
    for (int c = 0; c < 40; ++c) {
      ASSERT_TRUE(res.pixel_valid(r, c));
      EXPECT_LT(res.at(r, c), 1e-6f);
    }
  }
}

TEST(FilterMatches, SubsamplesToCap) {
  const MatchSet m = filter_matches(shift_pair(100, 100, 0, 0), FilterConfig{});
  EXPECT_EQ(m.survivor_count, 10000u);
  EXPECT_EQ(m.pairs.size(), 5000u);
  std::set<std::pair<double, double>> seen;
  for (const Match& x : m.pairs) seen.insert({x.a.row, x.a.col});
  EXPECT_EQ(seen.size(), 5000u);
}

TEST(FilterMatches, DefaultCapIs5000) { EXPECT_EQ(FilterConfig{}.max_matches, 5000u); }

TEST(FilterMatches, LowConfidenceIsEmpty) {
  FlowPair fp = shift_pair(10, 10, 0, 0);
  fp.conf_forward = constant(10, 10, 0.1f);
  try {
    filter_matches(fp, FilterConfig{});
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyResult);
    EXPECT_EQ(e.stage(), "match_filter");
  }
}

TEST(FilterMatches, ThresholdIsInclusive) {
  FilterConfig cfg;
  cfg.max_matches = 1000000;
  const MatchSet m = filter_matches(shift_pair(20, 30, 3, -1), cfg);
  EXPECT_EQ(m.survivor_count, 20u * 27u);
  cfg.cyclic_threshold_px = 1.999;
  expect_code(ErrorCode::kEmptyResult, [&] { filter_matches(shift_pair(20, 30, 3, -1), cfg); });
}

TEST(FilterMatches, ConfidenceBoundaryInclusive) {
  FlowPair fp = shift_pair(4, 4, 0, 0);
  fp.conf_forward = constant(4, 4, 0.2f);
  FilterConfig cfg;
  cfg.min_confidence = 0.2f;  // same float value as stored
  EXPECT_EQ(filter_matches(fp, cfg).survivor_count, 16u);
}

TEST(FilterMatches, ModelConfidenceGate) {
  FlowPair fp = shift_pair(10, 10, 0, 0);
  Raster mc = constant(10, 10, 0.9f);
  for (int c = 0; c < 10; ++c) mc.at(0, c) = 0.4f;
  fp.model_confidence = mc;
  EXPECT_EQ(filter_matches(fp, FilterConfig{}).survivor_count, 90u);
}

// Independent bilinear sampler with nodata renormalisation, for the recheck.
std::optional<std::pair<double, double>> sample2(const Raster& r, double y, double x) {
  if (!(y >= 0 && x >= 0 && y <= r.height() - 1 && x <= r.width() - 1)) return std::nullopt;
  const int y0 = static_cast<int>(std::floor(y)), x0 = static_cast<int>(std::floor(x));
  const double fy = y - y0, fx = x - x0;
  double sy = 0, sx = 0, sw = 0;
  for (int dy = 0; dy < 2; ++dy) {
    for (int dx = 0; dx < 2; ++dx) {
      const double w = (dy ? fy : 1 - fy) * (dx ? fx : 1 - fx);
      const int yy = std::min(y0 + dy, r.height() - 1), xx = std::min(x0 + dx, r.width() - 1);
      if (w == 0 || !r.pixel_valid(yy, xx)) continue;
      sy += w * r.at(yy, xx, 0);
      sx += w * r.at(yy, xx, 1);
      sw += w;
    }
  }
  if (sw == 0) return std::nullopt;
  return std::pair{sy / sw, sx / sw};
}

FlowPair random_pair(std::uint64_t seed) {
  SplitMix64 rng(seed);
  const int ha = 24 + static_cast<int>(rng.uniform_index(20)), wa = 24 + static_cast<int>(rng.uniform_index(20));
  const int hb = 24 + static_cast<int>(rng.uniform_index(20)), wb = 24 + static_cast<int>(rng.uniform_index(20));
  const double dy = rng.uniform(-3, 3), dx = rng.uniform(-3, 3);
  FlowPair fp;
  fp.forward = flow(ha, wa, [&](int r, int c) {
    return std::pair{r + dy + rng.uniform(-2, 2), c + dx + rng.uniform(-2, 2)};
  });
  fp.backward = flow(hb, wb, [&](int r, int c) {
    return std::pair{r - dy + rng.uniform(-2, 2), c - dx + rng.uniform(-2, 2)};
  });
  for (int i = 0; i < 20; ++i) {
    const int r = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(hb)));
    const int c = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(wb)));
    fp.backward.at(r, c, 0) = fp.backward.at(r, c, 1) = -9999.0f;
  }
  fp.conf_forward = Raster(ha, wa, Semantic::kConfidence1);
  for (float& v : fp.conf_forward.data()) v = static_cast<float>(rng.uniform01());
  fp.conf_backward = constant(hb, wb, 1.0f);
  return fp;
}

TEST(FilterMatches, BruteForceRecheck) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const FlowPair fp = random_pair(seed);
    FilterConfig cfg;
    cfg.max_matches = 1u << 30;
    std::set<std::pair<int, int>> expect;
    for (int r = 0; r < fp.forward.height(); ++r) {
      for (int c = 0; c < fp.forward.width(); ++c) {
        const double by = fp.forward.at(r, c, 0), bx = fp.forward.at(r, c, 1);
        const auto back = sample2(fp.backward, by, bx);
        if (!back) continue;
        const double res = std::hypot(back->first - r, back->second - c);
        if (res <= 2.0 && fp.conf_forward.at(r, c) >= 0.2f) expect.insert({r, c});
      }
    }
    std::set<std::pair<int, int>> got;
    MatchSet m;
    try {
      m = filter_matches(fp, cfg);
    } catch (const Error& e) {
      ASSERT_EQ(e.code(), ErrorCode::kEmptyResult);
    }
    for (const Match& x : m.pairs) {
      got.insert({static_cast<int>(x.a.row), static_cast<int>(x.a.col)});
      EXPECT_LE(x.residual_px, 2.0);
      EXPECT_GE(x.confidence, 0.2);
      EXPECT_EQ(x.b.row, fp.forward.at(static_cast<int>(x.a.row), static_cast<int>(x.a.col), 0));
    }
    EXPECT_EQ(got, expect) << "seed " << seed;
    EXPECT_EQ(m.survivor_count, expect.size());
  }
}

TEST(FilterMatches, ThresholdMonotone) {
  const FlowPair fp = random_pair(77);
  std::size_t prev = 0;
  for (double t : {0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0, 10.0}) {
    FilterConfig cfg;
    cfg.cyclic_threshold_px = t;
    std::size_t n = 0;
    try {
      n = filter_matches(fp, cfg).survivor_count;
    } catch (const Error&) {
    }
    EXPECT_GE(n, prev);
    prev = n;
  }
}

std::string csv_bytes(const MatchSet& m, const std::filesystem::path& p) {
  write_matches_csv(m, p);
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(FilterMatches, DeterministicAcrossThreads) {
  TempDir dir("mf");
  const FlowPair fp = shift_pair(120, 120, 0, 0);
  MatchSet a, b;
  {
    ThreadLimit l(1);
    a = filter_matches(fp, FilterConfig{});
  }
  {
    ThreadLimit l(8);
    b = filter_matches(fp, FilterConfig{});
  }
  EXPECT_EQ(csv_bytes(a, dir / "a.csv"), csv_bytes(b, dir / "b.csv"));
  FilterConfig other;
  other.seed = 5;
  EXPECT_NE(csv_bytes(a, dir / "a.csv"), csv_bytes(filter_matches(fp, other), dir / "c.csv"));
}

TEST(FilterMatches, CsvRoundTrip) {
  TempDir dir("mf");
  FilterConfig cfg;
  cfg.max_matches = 50;
  const MatchSet m = filter_matches(random_pair(3), cfg);
  write_matches_csv(m, dir / "m.csv");
  const MatchSet back = read_matches_csv(dir / "m.csv");
  ASSERT_EQ(back.pairs.size(), m.pairs.size());
  for (std::size_t i = 0; i < m.pairs.size(); ++i) {
    EXPECT_NEAR(back.pairs[i].b.col, m.pairs[i].b.col, 5e-7);
    EXPECT_NEAR(back.pairs[i].residual_px, m.pairs[i].residual_px, 5e-7);
  }
}

TEST(FilterMatches, ShapeMismatch) {
  FlowPair fp = shift_pair(10, 10, 0, 0);
  fp.conf_forward = constant(9, 10, 1.0f);
  expect_code(ErrorCode::kShapeMismatch, [&] { filter_matches(fp, FilterConfig{}); });
}

}  // namespace
}  // namespace georeg
