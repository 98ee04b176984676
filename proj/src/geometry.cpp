#include "georeg/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "georeg/parallel.hpp"
#include "georeg/random.hpp"

namespace georeg {

void Correspondences3D::validate() const {
  if (source.cols() != target.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "geometry",
                "source and target have different lengths");
  }
  if (weighted() && weights.size() != source.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "geometry", "weights length differs");
  }
  if (!source.allFinite() || !target.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "geometry", "non-finite point");
  }
  if (weighted() && ((weights.array() < 0.0).any() || !weights.allFinite())) {
    throw Error(ErrorCode::kInvalidArgument, "geometry", "weights must be finite and >= 0");
  }
}

Correspondences3D Correspondences3D::select(const std::vector<std::size_t>& indices) const {
  const auto n = static_cast<Eigen::Index>(indices.size());
  Correspondences3D out;
  out.source.resize(3, n);
  out.target.resize(3, n);
  if (weighted()) out.weights.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto i = static_cast<Eigen::Index>(indices[static_cast<std::size_t>(k)]);
    out.source.col(k) = source.col(i);
    out.target.col(k) = target.col(i);
    if (weighted()) out.weights(k) = weights(i);
  }
  return out;
}

Sim3d umeyama(const Correspondences3D& corr) {
  corr.validate();
  if (corr.weighted()) return georeg::umeyama(corr.source, corr.target, corr.weights);
  return georeg::umeyama(corr.source, corr.target);
}

void RansacConfig::validate() const {
  if (!(inlier_threshold > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "ransac", "inlier_threshold must be > 0");
  }
  if (max_iterations < 1) {
    throw Error(ErrorCode::kInvalidArgument, "ransac", "max_iterations must be >= 1");
  }
  if (min_sample_size < 3) {
    throw Error(ErrorCode::kInvalidArgument, "ransac", "min_sample_size must be >= 3");
  }
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "ransac", "confidence must be in (0, 1)");
  }
}

InlierSet count_inliers(const Sim3d& transform, const Correspondences3D& corr,
                        double threshold) {
  if (!(threshold > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "ransac", "threshold must be > 0");
  }
  InlierSet out;
  const std::size_t n = corr.size();
  out.mask.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    const double r = (transform * Vec3(corr.source.col(c)) - corr.target.col(c)).norm();
    if (r < threshold) {
      out.mask[i] = 1;
      ++out.count;
      out.residual_sum += r;
    }
  }
  return out;
}

namespace {

std::vector<std::size_t> canonical_order(const Correspondences3D& corr) {
  std::vector<std::size_t> order(corr.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto key = [&](std::size_t i, int k) {
    const auto c = static_cast<Eigen::Index>(i);
    return k < 3 ? corr.source(k, c) : corr.target(k - 3, c);
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    for (int k = 0; k < 6; ++k) {
      const double ka = key(a, k);
      const double kb = key(b, k);
      if (ka != kb) return ka < kb;
    }
    return false;
  });
  return order;
}

struct Hypothesis {
  bool valid = false;
  Sim3d transform;
  std::size_t count = 0;
  double residual_sum = 0.0;
};

bool better(const Hypothesis& a, const Hypothesis& b) {
  if (!a.valid) return false;
  if (!b.valid) return true;
  if (a.count != b.count) return a.count > b.count;
  return a.residual_sum < b.residual_sum;
}

int required_iterations(std::size_t inliers, std::size_t n, int sample, double confidence,
                        int cap) {
  const double w = static_cast<double>(inliers) / static_cast<double>(n);
  const double p_good = std::pow(w, sample);
  if (p_good >= 1.0) return 1;
  if (p_good <= 0.0) return cap;
  const double k = std::ceil(std::log(1.0 - confidence) / std::log(1.0 - p_good));
  if (!std::isfinite(k) || k > cap) return cap;
  return std::max(1, static_cast<int>(k));
}

constexpr int kBatch = 64;

}  // namespace

RansacResult ransac_sim3(const Correspondences3D& corr, const RansacConfig& cfg) {
  cfg.validate();
  corr.validate();
  const std::size_t n = corr.size();
  if (n < static_cast<std::size_t>(cfg.min_sample_size)) {
    throw Error(ErrorCode::kDegenerateInput, "ransac",
                "need at least " + std::to_string(cfg.min_sample_size) + " correspondences");
  }

  const std::vector<std::size_t> order = canonical_order(corr);
  Correspondences3D canon = corr.select(order);
  canon.weights.resize(0);

  const auto sample = static_cast<std::size_t>(cfg.min_sample_size);
  auto evaluate = [&](int iteration) {
    Hypothesis h;
    SplitMix64 rng = stream_for(cfg.seed, static_cast<std::uint64_t>(iteration));
    std::vector<std::size_t> picks;
    picks.reserve(sample);
    while (picks.size() < sample) {
      const std::size_t j = rng.uniform_index(n);
      if (std::find(picks.begin(), picks.end(), j) == picks.end()) picks.push_back(j);
    }
    try {
      const Correspondences3D minimal = canon.select(picks);
      h.transform = georeg::umeyama(minimal.source, minimal.target);
    } catch (const Error&) {
      return h;
    }
    h.valid = true;
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<Eigen::Index>(i);
      const double r = (h.transform * Vec3(canon.source.col(c)) - canon.target.col(c)).norm();
      if (r < cfg.inlier_threshold) {
        ++h.count;
        h.residual_sum += r;
      }
    }
    return h;
  };

  Hypothesis best;
  int budget = cfg.max_iterations;
  int done = 0;
  std::vector<Hypothesis> batch;
  while (done < budget) {
    const int count = std::min(kBatch, budget - done);
    batch.assign(static_cast<std::size_t>(count), Hypothesis{});
    parallel_for(static_cast<std::size_t>(count), [&](std::size_t k) {
      batch[k] = evaluate(done + static_cast<int>(k));
    });
    // Sequential reduction: identical to evaluating one iteration at a time.
    for (int k = 0; k < count && done < budget; ++k, ++done) {
      if (better(batch[static_cast<std::size_t>(k)], best)) {
        best = batch[static_cast<std::size_t>(k)];
        budget = std::min(budget, required_iterations(best.count, n, cfg.min_sample_size,
                                                      cfg.confidence, cfg.max_iterations));
      }
    }
  }

  if (!best.valid || best.count < 3) {
    throw Error(ErrorCode::kNoConsensus, "ransac",
                "best hypothesis has " + std::to_string(best.count) +
                    " inliers (< 3) after " + std::to_string(done) + " iterations");
  }

  const InlierSet canon_inliers = count_inliers(best.transform, canon, cfg.inlier_threshold);
  std::vector<std::size_t> members;
  for (std::size_t i = 0; i < n; ++i) {
    if (canon_inliers.mask[i]) members.push_back(i);
  }
  const Correspondences3D consensus = canon.select(members);

  RansacResult result;
  try {
    result.transform = georeg::umeyama(consensus.source, consensus.target);
  } catch (const Error& e) {
    throw Error(ErrorCode::kNoConsensus, "ransac",
                std::string("consensus set is degenerate: ") + e.what());
  }
  result.iterations = done;
  result.inliers.mask.assign(n, 0);
  result.inliers.count = canon_inliers.count;
  result.inliers.residual_sum = canon_inliers.residual_sum;
  for (std::size_t i = 0; i < n; ++i) {
    if (canon_inliers.mask[i]) result.inliers.mask[order[i]] = 1;
  }
  return result;
}

}  // namespace georeg
