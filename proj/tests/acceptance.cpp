// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include <Eigen/Geometry>
#include <nlohmann/json.hpp>

#include "georeg/cli.hpp"
#include "georeg/geodesy.hpp"
#include "georeg/geometry.hpp"
#include "georeg/gravity.hpp"
#include "georeg/icp.hpp"
#include "georeg/manifests.hpp"
#include "georeg/match_filter.hpp"
#include "georeg/metrics.hpp"
#include "georeg/registration.hpp"
#include "georeg/synth.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace georeg;
using testing::compare;
using testing::deg;
using testing::rad;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

int failures = 0;

// Runs one criterion; a thrown exception is a FAIL. `limit_s` <= 0 means no
// time limit.
void criterion(int n, const char* name, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(Clock::now() - t0).count();
  char timing[64];
  std::snprintf(timing, sizeof timing, "%.2f s", s);
  if (limit_s > 0 && s >= limit_s) {
    o.pass = false;
    o.detail += "; over the " + std::to_string(static_cast<int>(limit_s)) + " s limit";
  }
  if (!o.pass) ++failures;
  std::printf("%s %2d. %s [%s] %s\n", o.pass ? "PASS" : "FAIL", n, name, timing, o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

struct CliRun {
  int code = -1;
  std::string out, err;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "georeg");
  std::ostringstream out, err;
  CliRun r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 1 -------------------------------------------------------------------------
Outcome umeyama_recovery() {
  SplitMix64 rng(101);
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    const Sim3d truth(std::exp(rng.uniform(std::log(0.25), std::log(4.0))), testing::random_rotation(rng),
                      testing::random_vec(rng, -100, 100));
    const Points3d src = testing::random_points(rng, 500, -50, 50);
    const Sim3d got = georeg::umeyama(src, truth.apply(src));
    worst = std::max(worst, testing::max_param_diff(got, truth));
  }
  return {worst < 1e-8, fmt("worst parameter error %.3g", worst)};
}

// 2 -------------------------------------------------------------------------
Outcome ransac_recovery() {
  int ok = 0;
  double worst_t = 0, worst_s = 0, worst_r = 0;
  for (int trial = 0; trial < 50; ++trial) {
    SplitMix64 rng = stream_for(202, static_cast<std::uint64_t>(trial));
    const Sim3d truth(std::exp(rng.uniform(std::log(0.5), std::log(2.0))), testing::random_rotation(rng),
                      testing::random_vec(rng, -20, 20));
    Correspondences3D c;
    c.source = testing::random_points(rng, 1000, -25, 25);
    c.target = truth.apply(c.source);
    for (int i = 0; i < 1000; ++i) {
      if (i < 300) {
        c.target.col(i) = testing::random_vec(rng, -60, 60);
      } else {
        c.target.col(i) += 0.05 * Vec3(rng.normal(), rng.normal(), rng.normal());
      }
    }
    RansacConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(trial) + 1;
    const RansacResult r = ransac_sim3(c, cfg);
    const auto e = compare(r.transform, truth);
    const double t_err = (r.transform.translation() - truth.translation()).norm();
    worst_t = std::max(worst_t, t_err);
    worst_s = std::max(worst_s, e.scale);
    worst_r = std::max(worst_r, e.rotation_deg);
    ok += t_err < 0.05 && e.scale < 0.01 && e.rotation_deg < 0.5;
  }
  return {ok >= 49, std::to_string(ok) + "/50 trials; worst translation " + fmt("%.4f m, scale %.2e, rotation %.4f deg", worst_t, worst_s, worst_r)};
}

// 3 -------------------------------------------------------------------------
Outcome tiling_constant() {
  const TileGrid one = make_tile_grid(2048, 2048, 300, 0.25);
  const TileGrid nine = make_tile_grid(2048, 2048, 300, 0.25, 9);
  return {one.tiles.size() == 81 && nine.tiles.size() == 729,
          std::to_string(one.tiles.size()) + " tiles per render, " + std::to_string(nine.tiles.size()) + " for 9 renders"};
}

// 4 -------------------------------------------------------------------------
std::optional<std::pair<double, double>> oracle_sample(const Raster& r, double y, double x) {
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

Outcome filter_oracle() {
  int equal = 0;
  std::size_t total = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    SplitMix64 rng(4000 + seed);
    const int bh = 120 + static_cast<int>(rng.uniform_index(80)), bw = 120 + static_cast<int>(rng.uniform_index(80));
    synth::WindowMap w;
    w.quarter_turns = static_cast<int>(rng.uniform_index(4));
    w.ch = 60 + static_cast<int>(rng.uniform_index(50));
    w.cw = 60 + static_cast<int>(rng.uniform_index(50));
    w.row0 = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(bh - w.ch + 1)));
    w.col0 = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(bw - w.cw + 1)));
    synth::NoiseSpec noise;
    noise.flow_jitter_px = rng.uniform(0.2, 1.5);
    noise.outlier_fraction = rng.uniform(0.0, 0.4);
    noise.hard = seed % 2 == 0;
    FlowPair fp = synth::corrupt_flows(synth::window_flow_pair(w, bh, bw), noise, seed);
    for (float& v : fp.conf_forward.data()) {
      if (rng.uniform01() < 0.2) v = static_cast<float>(rng.uniform01());
    }
    FilterConfig cfg;
    cfg.max_matches = 1u << 30;
    std::set<std::pair<int, int>> expect;
    for (int r = 0; r < fp.forward.height(); ++r) {
      for (int c = 0; c < fp.forward.width(); ++c) {
        if (!fp.forward.pixel_valid(r, c)) continue;
        const auto back = oracle_sample(fp.backward, fp.forward.at(r, c, 0), fp.forward.at(r, c, 1));
        if (!back) continue;
        if (std::hypot(back->first - r, back->second - c) <= 2.0 && fp.conf_forward.at(r, c) >= 0.2f) {
          expect.insert({r, c});
        }
      }
    }
    const MatchSet m = filter_matches(fp, cfg);
    std::set<std::pair<int, int>> got;
    for (const Match& x : m.pairs) got.insert({static_cast<int>(x.a.row), static_cast<int>(x.a.col)});
    equal += got == expect && m.survivor_count == expect.size();
    total += expect.size();
  }
  return {equal == 20, std::to_string(equal) + "/20 pairs identical, " + std::to_string(total) + " survivors checked"};
}

// 5 -------------------------------------------------------------------------
// Golden value for the fixed seed below, recorded from the first run.
constexpr std::size_t kHardModeSurvivors = 4;

Outcome hard_mode_rejection() {
  const FlowPair fp = synth::window_flow_pair({0, 0, 512, 512, 0}, 512, 512);
  synth::NoiseSpec noise;
  noise.outlier_fraction = 0.3;
  noise.hard = true;
  synth::CorruptionMasks masks;
  const FlowPair out = synth::corrupt_flows(fp, noise, kDefaultSeed, &masks);
  FilterConfig cfg;
  cfg.max_matches = 1u << 30;
  const MatchSet m = filter_matches(out, cfg);
  std::size_t corrupted = 0, survived = 0;
  for (std::uint8_t c : masks.forward) corrupted += c;
  for (const Match& x : m.pairs) {
    survived += masks.forward[static_cast<std::size_t>(x.a.row) * 512 + static_cast<std::size_t>(x.a.col)];
  }
  const double removed = 1.0 - static_cast<double>(survived) / static_cast<double>(corrupted);
  return {removed >= 0.99 && survived == kHardModeSurvivors,
          std::to_string(survived) + " of " + std::to_string(corrupted) + " corrupted pixels survive, removed " +
              fmt("%.5f", removed)};
}

// 6 -------------------------------------------------------------------------
Outcome gravity_chain() {
  double worst = 0;
  int flips = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    synth::GravitySpec spec;
    spec.seed = seed;
    const synth::GravityScene s = synth::generate_gravity_scene(spec);
    const Points3d g = select_ground_points(s.points, s.masks);
    const PlaneFit fit = ransac_plane(g, default_plane_threshold(g), 1000, kDefaultSeed);
    const UpVote v = disambiguate_up(fit.plane, s.cameras);
    const double c = v.up.dot(s.true_up);
    if (c <= 0) ++flips;
    worst = std::max(worst, deg(std::acos(std::min(1.0, std::abs(c)))));
  }
  return {worst < 0.1 && flips == 0, fmt("worst angle %.4f deg, %.0f flips over 50 seeds", worst, flips)};
}

// 7 -------------------------------------------------------------------------
// Independent least-squares bound: Eigen's Umeyama on uncorrupted pairs, with
// the target read off the DSM by plain bilinear interpolation at the flowed
// pixel; returns the camera MAE under that fit. `pixels` selects the A pixels
// used.
double clean_pair_bound(const synth::AirSatScene& s, const std::vector<std::pair<int, int>>& pixels) {
  std::vector<Vec3> src, dst;
  const Raster& f = s.flows.forward;
  for (const auto& [i, j] : pixels) {
    if (s.corruption.forward[static_cast<std::size_t>(i * f.width() + j)] || !f.pixel_valid(i, j)) continue;
    const double r = f.at(i, j, 0), c = f.at(i, j, 1);
    if (r < 0 || c < 0 || r > s.dsm.height() - 1 || c > s.dsm.width() - 1) continue;
    const int r0 = std::min(static_cast<int>(r), s.dsm.height() - 2), c0 = std::min(static_cast<int>(c), s.dsm.width() - 2);
    const double fr = r - r0, fc = c - c0;
    const double z = (1 - fr) * ((1 - fc) * s.dsm.at(r0, c0) + fc * s.dsm.at(r0, c0 + 1)) +
                     fr * ((1 - fc) * s.dsm.at(r0 + 1, c0) + fc * s.dsm.at(r0 + 1, c0 + 1));
    const double e = s.geo.origin_easting + (c + 0.5) * s.geo.pixel_size_x;
    const double n = s.geo.origin_northing + (r + 0.5) * s.geo.pixel_size_y;
    src.emplace_back(s.xyz_air.at(i, j, 0), s.xyz_air.at(i, j, 1), s.xyz_air.at(i, j, 2));
    dst.emplace_back(e, n, z);
  }
  Eigen::Matrix3Xd a(3, static_cast<Eigen::Index>(src.size())), b(3, static_cast<Eigen::Index>(dst.size()));
  for (std::size_t k = 0; k < src.size(); ++k) {
    a.col(static_cast<Eigen::Index>(k)) = src[k];
    b.col(static_cast<Eigen::Index>(k)) = dst[k];
  }
  const Eigen::Matrix4d t = Eigen::umeyama(a, b, true);
  double sum = 0;
  for (std::size_t k = 0; k < s.air_cameras.size(); ++k) {
    const Vec3 p = (t * s.air_cameras[k].center.homogeneous()).head<3>();
    sum += (p - s.camera_enu[k]).norm();
  }
  return sum / static_cast<double>(s.air_cameras.size());
}

Outcome end_to_end(const fs::path& work) {
  const Sim3d truth(1.7, axis_angle(Vec3(0.4, -0.3, 1.0), rad(63)), Vec3(-22, 41, 7.5));
  auto run_scene = [&](const std::string& name, const json& noise, double* mae, double* param_err) {
    json spec = {{"truth_transform", to_json(LabelledSim3{truth, "air_model", "geo"})}, {"seed", 5}};
    if (!noise.is_null()) spec["noise"] = noise;
    const fs::path dir = work / name;
    fs::create_directories(dir);
    std::ofstream(dir / "scene.json") << spec.dump();
    const fs::path s = dir / "scene";
    if (cli({"synth", "--spec", (dir / "scene.json").string(), "--out", s.string()}).code != 0) {
      throw std::runtime_error("synth failed");
    }
    const CliRun reg = cli({"register-air2sat", "--flow-fwd", (s / "flow_fwd.grr").string(), "--flow-bwd",
                            (s / "flow_bwd.grr").string(), "--conf-fwd", (s / "conf_fwd.grr").string(),
                            "--conf-bwd", (s / "conf_bwd.grr").string(), "--xyz", (s / "xyz_air.grr").string(),
                            "--dsm", (s / "dsm.grr").string(), "--out", (dir / "T.json").string()});
    if (reg.code != 0) throw std::runtime_error("register-air2sat: " + reg.err);
    const CliRun ev = cli({"evaluate", "--est", (s / "cams_est.json").string(), "--truth",
                           (s / "cams_truth.json").string(), "--cov", (s / "cov.json").string(), "--transform",
                           (dir / "T.json").string(), "--out", (dir / "report.json").string()});
    if (ev.code != 0) throw std::runtime_error("evaluate: " + ev.err);
    *mae = read_json(dir / "report.json").at("mean_absolute_error").get<double>();
    *param_err = testing::max_param_diff(sim3_from_json(read_json(dir / "T.json")).transform, truth);
    return synth::air_sat_spec_from_json(spec);
  };
  double mae0 = 0, err0 = 0, mae1 = 0, err1 = 0;
  run_scene("clean", json(), &mae0, &err0);
  const synth::AirSatSpec jitter_spec = run_scene("jitter", {{"flow_jitter_px", 1.0}}, &mae1, &err1);
  // The bound uses the match set the pipeline itself works from (the same
  // filter and 5000-match subsample, flows as read back from disk), minus
  // corrupted pairs; the all-pixel fit is reported alongside.
  const synth::AirSatScene scene = synth::generate_air_sat_scene(jitter_spec);
  FlowPair on_disk = scene.flows;
  on_disk.model_confidence.reset();
  FilterConfig fc;
  fc.seed = kDefaultSeed;
  std::vector<std::pair<int, int>> used, all;
  for (const Match& m : filter_matches(on_disk, fc).pairs) used.emplace_back(static_cast<int>(m.a.row), static_cast<int>(m.a.col));
  for (int i = 0; i < scene.xyz_air.height(); ++i) {
    for (int j = 0; j < scene.xyz_air.width(); ++j) all.emplace_back(i, j);
  }
  const double bound = clean_pair_bound(scene, used);
  const double bound_all = clean_pair_bound(scene, all);
  return {err0 < 1e-6 && mae1 < 2 * bound,
          fmt("noiseless parameter error %.3g; jitter MAE %.4f m vs clean-pair bound %.4f m", err0, mae1, bound) +
              fmt(" (%.0f pairs; all-pixel fit %.4f m)", static_cast<double>(used.size()), bound_all)};
}

// 8 -------------------------------------------------------------------------
Outcome ground_consensus() {
  synth::GroundAirSpec spec;
  spec.ground_to_air = Sim3d(0.8, axis_angle(Vec3(0.2, 0.1, 1), rad(40)), Vec3(3, -7, 1.5));
  spec.seed = 11;
  const synth::GroundAirScene s = synth::generate_ground_air_scene(spec);
  GroundToAirConfig cfg;
  const GroundToAirResult r = register_ground_to_air(s.pairs, s.ground_xyz, s.tile_xyz, cfg);
  const json ledger = to_json(r);
  std::size_t best = 0, winner_inliers = 0;
  int winners = 0;
  for (const json& c : ledger.at("candidates")) {
    best = std::max(best, c.at("inlier_count").get<std::size_t>());
    if (c.at("winner").get<bool>()) {
      ++winners;
      winner_inliers = c.at("inlier_count").get<std::size_t>();
    }
  }
  const double err = testing::max_param_diff(r.transform, spec.ground_to_air);
  return {s.grid.tiles.size() == 81 && s.ground_xyz.size() == 10 && cfg.top_k == 5 && cfg.inlier_threshold == 0.5 &&
              err < 1e-6 && winners == 1 && winner_inliers == best,
          fmt("parameter error %.3g; winner %.0f pooled inliers, best %.0f", err, static_cast<double>(winner_inliers),
              static_cast<double>(best))};
}

// 9 -------------------------------------------------------------------------
Outcome icp_recovery() {
  SplitMix64 rng(909);
  const Points3d src = testing::random_points(rng, 4000, -10, 10);
  const Sim3d truth(1.0, axis_angle(Vec3(0.3, 1.0, 0.2), rad(2)), Vec3(0.06, -0.05, 0.06).normalized() * 0.1);
  Points3d s_all(3, 5000), d_all(3, 5000);
  s_all.leftCols(4000) = src;
  d_all.leftCols(4000) = truth.apply(src);
  for (int i = 4000; i < 5000; ++i) {
    s_all.col(i) = Vec3(rng.uniform(-400, -300), rng.uniform(-50, 50), rng.uniform(-50, 50));
    d_all.col(i) = Vec3(rng.uniform(300, 400), rng.uniform(-50, 50), rng.uniform(-50, 50));
  }
  IcpConfig cfg;
  cfg.max_iterations = 200;
  const IcpResult r = icp_refine(s_all, d_all, Sim3d(), cfg);
  bool monotone = true;
  for (std::size_t i = 1; i < r.objective_trace.size(); ++i) {
    monotone = monotone && r.objective_trace[i] <= r.objective_trace[i - 1] * (1 + 1e-12) + 1e-15;
  }
  const auto e = compare(r.transform, truth);
  return {e.translation < 1e-4 && e.rotation_deg < 1e-3 && monotone,
          fmt("translation %.3g m, rotation %.3g deg, %.0f iterations", e.translation, e.rotation_deg, r.iterations) +
              (monotone ? ", objective non-increasing" : ", objective increased")};
}

// 10 ------------------------------------------------------------------------
Outcome metrics_closed_forms() {
  std::string why;
  const DsmCovariance id;
  // (1, 0, 0) against Sigma = I.
  const RegistrationReport unit = evaluate({Vec3(1, 0, 0)}, {Vec3::Zero()}, id);
  if (std::abs(unit.mahalanobis_distance - 1.0) > 1e-15) why += " mdist(1,0,0)";
  DsmCovariance diag;
  diag.sigma = Eigen::Vector3d(4.0, 1.0, 9.0).asDiagonal();
  if (std::abs(evaluate({Vec3(2, 1, 3)}, {Vec3::Zero()}, diag).mahalanobis_distance - std::sqrt(3.0)) > 1e-14) {
    why += " mdist(diag)";
  }
  // CE90/LE90 on errors k (cos 0.7k, sin 0.7k, 0.5) k = 1..10: linear
  // percentile at position 8.1 gives 9.1 and 4.55.
  std::vector<Vec3> est, truth;
  for (int k = 1; k <= 10; ++k) {
    est.emplace_back(k * std::cos(0.7 * k), k * std::sin(0.7 * k), 0.5 * k);
    truth.emplace_back(Vec3::Zero());
  }
  const RegistrationReport ce = evaluate(est, truth, id);
  if (std::abs(ce.ce90 - 9.1) > 1e-12 || std::abs(ce.le90 - 4.55) > 1e-12) why += " ce90/le90";
  // Relative error ignores a common shift.
  SplitMix64 rng(10);
  std::vector<Vec3> t2, e2, shifted;
  for (int i = 0; i < 20; ++i) {
    t2.push_back(testing::random_vec(rng, -100, 100));
    e2.push_back(t2.back() + testing::random_vec(rng, -2, 2));
    shifted.push_back(e2.back() + Vec3(7, -4, 12));
  }
  const RegistrationReport a = evaluate(e2, t2, id), b = evaluate(shifted, t2, id);
  if (std::abs(a.mean_relative_error - b.mean_relative_error) > 1e-12 ||
      std::abs(a.median_relative_error - b.median_relative_error) > 1e-12) {
    why += " relative-shift";
  }
  const double m07 = normalize_by_standoff(1.42, 148.0), other = normalize_by_standoff(0.67, 113.0);
  if (std::abs(m07 - 0.0096) > 5e-5 || std::abs(other - 0.0059) > 5e-5) why += " standoff";
  return {why.empty(), fmt("standoff 1.42/148 = %.4f, 0.67/113 = %.4f", m07, other) + (why.empty() ? "" : "; failed:" + why)};
}

// 11 ------------------------------------------------------------------------
Outcome geodesy_oracle() {
  std::ifstream in(fs::path(GEOREG_TEST_DIR) / "oracles" / "geodesy_points.csv");
  if (!in) return {false, "oracle table missing"};
  std::string line;
  std::getline(in, line);
  std::size_t n = 0;
  double worst_fwd = 0, worst_rt = 0, max_range = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    double v[9];
    for (double& x : v) {
      std::string item;
      std::getline(ss, item, ',');
      x = std::stod(item);
    }
    const GeodeticPoint p{v[0], v[1], v[2]}, anchor{v[3], v[4], v[5]};
    const Vec3 oracle(v[6], v[7], v[8]);
    const Vec3 enu = geodetic_to_enu(p, anchor);
    worst_fwd = std::max(worst_fwd, (enu - oracle).norm());
    worst_rt = std::max(worst_rt, (geodetic_to_enu(enu_to_geodetic(enu, anchor), anchor) - enu).norm());
    max_range = std::max(max_range, oracle.head<2>().norm());
    ++n;
  }
  return {n == 1000 && worst_fwd < 1e-9 && worst_rt < 1e-9 && max_range < 50000,
          std::to_string(n) + fmt(" points up to %.1f km; vs oracle %.3g m, round trip %.3g m", max_range / 1000,
                                  worst_fwd, worst_rt)};
}

// 12 ------------------------------------------------------------------------
// Every pipeline subcommand, run with several --threads values (and the
// default twice) through the shipped binary; all outputs must be byte-equal.
Outcome determinism(const fs::path& work) {
  const fs::path sa = work / "det_air", sg = work / "det_ground", sv = work / "det_grav";
  std::ofstream(work / "air.json") << json{{"seed", 3},
                                           {"noise", {{"flow_jitter_px", 1.0}, {"outlier_fraction", 0.3}, {"mode", "hard"}}},
                                           {"truth_transform", to_json(LabelledSim3{Sim3d(0.9, axis_angle(Vec3(1, 1, 1), 0.5), Vec3(3, 4, 5)), "air_model", "geo"})}}
                                          .dump();
  std::ofstream(work / "ground.json") << json{{"kind", "ground2air"}, {"seed", 8},
                                              {"truth_transform", to_json(LabelledSim3{Sim3d(1.1, axis_angle(Vec3(0, 0.2, 1), 0.3), Vec3(-2, 1, 0.5)), "ground_model", "air_model"})}}
                                             .dump();
  std::ofstream(work / "grav.json") << json{{"kind", "gravity"}, {"seed", 6}}.dump();
  for (const auto& [spec, out] : {std::pair{work / "air.json", sa}, {work / "ground.json", sg}, {work / "grav.json", sv}}) {
    if (cli({"synth", "--spec", spec.string(), "--out", out.string()}).code != 0) return {false, "synth failed"};
  }
  const std::string exe = GEOREG_CLI_PATH;
  std::vector<std::string> variants{"--threads 1", "--threads 2", "--threads 8", "", ""};
  std::vector<std::vector<std::string>> outputs;
  for (std::size_t v = 0; v < variants.size(); ++v) {
    const fs::path o = work / ("det_out_" + std::to_string(v));
    fs::create_directories(o);
    const std::string t = " " + variants[v];
    const std::string a = sa.string() + "/", g = sg.string() + "/", q = sv.string() + "/", op = o.string() + "/";
    const std::vector<std::string> cmds = {
        "filter-matches --flow-fwd " + a + "flow_fwd.grr --flow-bwd " + a + "flow_bwd.grr --conf-fwd " + a +
            "conf_fwd.grr --conf-bwd " + a + "conf_bwd.grr --max-matches 2000 --out " + op + "m.csv",
        "register-air2sat --flow-fwd " + a + "flow_fwd.grr --flow-bwd " + a + "flow_bwd.grr --conf-fwd " + a +
            "conf_fwd.grr --conf-bwd " + a + "conf_bwd.grr --xyz " + a + "xyz_air.grr --dsm " + a +
            "dsm.grr --out " + op + "air.json --report " + op + "air_report.json",
        "register-ground2air --pairs " + g + "pairs.json --out " + op + "g2a.json --ledger " + op + "ledger.json",
        "icp-refine --source " + g + "ground_cloud.csv --target " + g + "air_cloud.csv --init " + op +
            "g2a.json --out " + op + "icp.json --trace " + op + "trace.json",
        "estimate-gravity --points " + q + "points.json --cameras " + q + "cameras.json --masks " + q +
            "masks.json --out " + op + "up.json",
        "evaluate --est " + a + "cams_est.json --truth " + a + "cams_truth.json --cov " + a + "cov.json --transform " +
            op + "air.json --out " + op + "eval.json",
    };
    for (const std::string& c : cmds) {
      const int st = std::system((exe + " " + c + t + " > /dev/null 2> " + op + "stderr.txt").c_str());
      if (!WIFEXITED(st) || WEXITSTATUS(st) != 0) {
        return {false, "command failed: " + c.substr(0, c.find(' ')) + ": " + slurp(op + "stderr.txt")};
      }
    }
    std::vector<std::string> bytes;
    for (const char* f : {"m.csv", "air.json", "air_report.json", "g2a.json", "ledger.json", "icp.json", "trace.json",
                          "up.json", "eval.json"}) {
      bytes.push_back(slurp(o / f));
    }
    outputs.push_back(std::move(bytes));
  }
  std::size_t diffs = 0;
  for (std::size_t v = 1; v < outputs.size(); ++v) {
    for (std::size_t f = 0; f < outputs[0].size(); ++f) diffs += outputs[v][f] != outputs[0][f];
  }
  return {diffs == 0, std::to_string(outputs[0].size()) + " outputs x " + std::to_string(variants.size()) +
                          " runs (threads 1/2/8/default x2), " + std::to_string(diffs) + " differ"};
}

}  // namespace

int main() {
  testing::TempDir work("acceptance");
  criterion(1, "Sim(3) recovery, 100 noiseless transforms", 1, umeyama_recovery);
  criterion(2, "RANSAC robust recovery, 30% outliers", 10, ransac_recovery);
  criterion(3, "Tiling constant 81 / 729", 0, tiling_constant);
  criterion(4, "Cyclic filter equals brute-force recheck", 5, filter_oracle);
  criterion(5, "Hard-mode outlier rejection >= 99%", 5, hard_mode_rejection);
  criterion(6, "Gravity chain over 50 seeds", 5, gravity_chain);
  criterion(7, "End-to-end airborne to satellite", 30, [&] { return end_to_end(work.path()); });
  criterion(8, "Exhaustive-matching consensus", 60, ground_consensus);
  criterion(9, "ICP with far outliers", 5, icp_recovery);
  criterion(10, "Metric closed forms and standoff", 0, metrics_closed_forms);
  criterion(11, "Geodesy against the ECEF oracle", 2, geodesy_oracle);
  criterion(12, "Determinism across runs and --threads", 0, [&] { return determinism(work.path()); });
  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
