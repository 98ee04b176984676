#include "georeg/match_filter.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "georeg/parallel.hpp"
#include "georeg/random.hpp"

namespace georeg {

namespace {

constexpr float kResidualNodata = -1.0f;

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kShapeMismatch, "match_filter", what);
}

// Round trip A -> B -> A for one pixel, in double precision.
std::optional<double> round_trip(const FlowPair& fp, int r, int c) {
  if (!fp.forward.pixel_valid(r, c)) return std::nullopt;
  const PixelCoord y{fp.forward.at(r, c, 0), fp.forward.at(r, c, 1)};
  if (!fp.backward.contains(y)) return std::nullopt;
  std::array<double, 2> back{};
  if (!sample_bilinear(fp.backward, y, back)) return std::nullopt;
  return std::hypot(back[0] - r, back[1] - c);
}

}  // namespace

void FlowPair::validate() const {
  require(forward.semantic() == Semantic::kFlow2 && backward.semantic() == Semantic::kFlow2,
          "flows must be Flow2 rasters");
  require(conf_forward.channels() == 1 && conf_backward.channels() == 1,
          "confidence maps must have one channel");
  require(conf_forward.same_shape(forward), "conf_forward must match the forward flow shape");
  require(conf_backward.same_shape(backward), "conf_backward must match the backward flow shape");
  if (model_confidence) {
    require(model_confidence->channels() == 1 && model_confidence->same_shape(forward),
            "model_confidence must be a single-channel A-shaped raster");
  }
}

void FilterConfig::validate() const {
  if (!(cyclic_threshold_px > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "match_filter", "cyclic_threshold_px must be > 0");
  }
  if (!(min_confidence >= 0.0 && min_confidence <= 1.0) ||
      !(min_model_confidence >= 0.0 && min_model_confidence <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "match_filter",
                "confidence thresholds must lie in [0, 1]");
  }
  if (max_matches < 3) {
    throw Error(ErrorCode::kInvalidArgument, "match_filter", "max_matches must be >= 3");
  }
}

Raster cyclic_residuals(const FlowPair& fp) {
  fp.validate();
  const int h = fp.forward.height();
  const int w = fp.forward.width();
  Raster out(h, w, Semantic::kConfidence1, kResidualNodata);
  parallel_for(static_cast<std::size_t>(h), [&](std::size_t row) {
    const int r = static_cast<int>(row);
    for (int c = 0; c < w; ++c) {
      const auto residual = round_trip(fp, r, c);
      out.at(r, c) = residual ? static_cast<float>(*residual) : kResidualNodata;
    }
  });
  return out;
}

MatchSet filter_matches(const FlowPair& fp, const FilterConfig& cfg) {
  cfg.validate();
  fp.validate();
  const int h = fp.forward.height();
  const int w = fp.forward.width();

  // Per-row collection, concatenated in row order.
  std::vector<std::vector<Match>> rows(static_cast<std::size_t>(h));
  parallel_for(static_cast<std::size_t>(h), [&](std::size_t row) {
    const int r = static_cast<int>(row);
    auto& bucket = rows[row];
    for (int c = 0; c < w; ++c) {
      const float conf = fp.conf_forward.at(r, c);
      if (fp.conf_forward.is_nodata(conf) || !(conf >= cfg.min_confidence)) continue;
      if (fp.model_confidence) {
        const float mc = fp.model_confidence->at(r, c);
        if (fp.model_confidence->is_nodata(mc) || !(mc >= cfg.min_model_confidence)) continue;
      }
      const auto residual = round_trip(fp, r, c);
      if (!residual || !(*residual <= cfg.cyclic_threshold_px)) continue;
      bucket.push_back(Match{{static_cast<double>(r), static_cast<double>(c)},
                             {fp.forward.at(r, c, 0), fp.forward.at(r, c, 1)},
                             *residual,
                             conf});
    }
  });

  std::vector<Match> all;
  for (auto& bucket : rows) all.insert(all.end(), bucket.begin(), bucket.end());
  if (all.empty()) {
    throw Error(ErrorCode::kEmptyResult, "match_filter",
                "no match passes the cyclic-consistency and confidence gates");
  }

  MatchSet out;
  out.survivor_count = all.size();
  if (all.size() <= cfg.max_matches) {
    out.pairs = std::move(all);
  } else {
    const auto keep = sample_without_replacement(all.size(), cfg.max_matches, cfg.seed);
    out.pairs.reserve(keep.size());
    for (std::size_t i : keep) out.pairs.push_back(all[i]);
  }
  return out;
}

void write_matches_csv(const MatchSet& matches, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "match_filter", "cannot write " + path.string());
  out << "row_a,col_a,row_b,col_b,residual_px,confidence\n";
  char line[256];
  for (const Match& m : matches.pairs) {
    std::snprintf(line, sizeof(line), "%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", m.a.row, m.a.col,
                  m.b.row, m.b.col, m.residual_px, m.confidence);
    out << line;
  }
}

MatchSet read_matches_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "match_filter", "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("row_a,col_a,row_b,col_b", 0) != 0) {
    throw Error(ErrorCode::kFormatError, "match_filter", path.string() + ": bad CSV header");
  }
  MatchSet out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    Match m;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf", &m.a.row, &m.a.col, &m.b.row,
                    &m.b.col, &m.residual_px, &m.confidence) != 6) {
      throw Error(ErrorCode::kFormatError, "match_filter",
                  path.string() + ":" + std::to_string(lineno) + ": expected 6 numbers");
    }
    out.pairs.push_back(m);
  }
  out.survivor_count = out.pairs.size();
  return out;
}

}  // namespace georeg
