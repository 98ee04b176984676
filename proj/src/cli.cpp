#include "georeg/cli.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "georeg/geometry.hpp"
#include "georeg/gravity.hpp"
#include "georeg/icp.hpp"
#include "georeg/manifests.hpp"
#include "georeg/match_filter.hpp"
#include "georeg/metrics.hpp"
#include "georeg/parallel.hpp"
#include "georeg/registration.hpp"
#include "georeg/synth.hpp"

#ifndef GEOREG_VERSION
#define GEOREG_VERSION "0.0.0"
#endif

namespace georeg {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view tool_version() { return GEOREG_VERSION; }

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cli", "cannot open " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::kIoError, "cli", "SHA-256 unavailable");
  }
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

namespace {

// Options every subcommand takes.
struct Common {
  std::uint64_t seed = kDefaultSeed;
  int threads = 0;
  std::string config;
  std::string manifest;
};

struct Run {
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;
  fs::path manifest_path;
  json summary = json::object();
};

struct Command {
  CLI::App* app = nullptr;
  std::shared_ptr<Common> common;
  std::function<void(Run&)> body;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "RNG seed");
  sub->add_option("--threads", c.threads, "Worker threads (0 = all)")->check(CLI::NonNegativeNumber);
  sub->add_option("--config", c.config, "JSON file of default flag values (flags win)");
  sub->add_option("--manifest", c.manifest, "Run manifest path (default: next to --out)");
}

void add_filter_options(CLI::App* sub, FilterConfig& f) {
  sub->add_option("--cyclic-threshold", f.cyclic_threshold_px, "Max round-trip residual, px");
  sub->add_option("--min-confidence", f.min_confidence, "Min forward confidence");
  sub->add_option("--min-model-confidence", f.min_model_confidence, "Min rendering confidence");
  sub->add_option("--max-matches", f.max_matches, "Subsample survivors to this many");
}

void add_ransac_options(CLI::App* sub, RansacConfig& r) {
  sub->add_option("--inlier-threshold", r.inlier_threshold, "RANSAC inlier threshold, m");
  sub->add_option("--max-iterations", r.max_iterations, "RANSAC iteration cap");
  sub->add_option("--confidence", r.confidence, "RANSAC stopping confidence");
}

struct FlowPaths {
  std::string fwd, bwd, cf, cb, model_conf;
};

void add_flow_options(CLI::App* sub, FlowPaths& p) {
  sub->add_option("--flow-fwd", p.fwd, "Forward flow (Flow2, A-shaped)")->required()->check(CLI::ExistingFile);
  sub->add_option("--flow-bwd", p.bwd, "Backward flow (Flow2, B-shaped)")->required()->check(CLI::ExistingFile);
  sub->add_option("--conf-fwd", p.cf, "Forward confidence")->required()->check(CLI::ExistingFile);
  sub->add_option("--conf-bwd", p.cb, "Backward confidence")->required()->check(CLI::ExistingFile);
  sub->add_option("--model-conf", p.model_conf, "Rendering confidence on A")->check(CLI::ExistingFile);
}

Raster load(Run& run, const fs::path& p) {
  run.inputs.push_back(p);
  return read_raster(p);
}

json load_json(Run& run, const fs::path& p) {
  run.inputs.push_back(p);
  return read_json_file(p);
}

FlowPair load_flows(Run& run, const FlowPaths& p) {
  FlowPair fp;
  fp.forward = load(run, p.fwd);
  fp.backward = load(run, p.bwd);
  fp.conf_forward = load(run, p.cf);
  fp.conf_backward = load(run, p.cb);
  if (!p.model_conf.empty()) fp.model_confidence = load(run, p.model_conf);
  return fp;
}

void emit(Run& run, const json& j, const fs::path& out) {
  write_json_file(j, out);
  run.outputs.push_back(out);
}

Vec3 parse_vec3(const std::string& s, const char* what) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) v.clear();
    } catch (const std::exception&) {
      v.clear();
      break;
    }
  }
  if (v.size() != 3) {
    throw Error(ErrorCode::kInvalidArgument, "cli", std::string(what) + " expects three comma-separated numbers");
  }
  return {v[0], v[1], v[2]};
}

json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

// --- subcommands ---------------------------------------------------------

Command filter_matches_cmd(CLI::App& app) {
  struct Opts {
    FlowPaths flows;
    FilterConfig filter;
    std::string out;
  };
  auto o = std::make_shared<Opts>();
  Command c{app.add_subcommand("filter-matches", "Cyclic-consistency match filtering"),
            std::make_shared<Common>(), {}};
  add_flow_options(c.app, o->flows);
  add_filter_options(c.app, o->filter);
  c.app->add_option("--out", o->out, "Output CSV")->required();
  auto common = c.common;
  c.body = [o, common](Run& run) {
    FilterConfig cfg = o->filter;
    cfg.seed = common->seed;
    const MatchSet m = filter_matches(load_flows(run, o->flows), cfg);
    write_matches_csv(m, o->out);
    run.outputs.push_back(o->out);
    run.summary = {{"survivor_count", m.survivor_count}, {"match_count", m.pairs.size()}};
  };
  return c;
}

Command estimate_gravity_cmd(CLI::App& app) {
  struct Opts {
    std::string points, cameras, masks, out;
    double ground_fraction = 0.5;
    std::optional<double> plane_threshold;
    int plane_iterations = 1000;
    RayGridConfig rays;
  };
  auto o = std::make_shared<Opts>();
  Command c{app.add_subcommand("estimate-gravity", "Up vector and z-up rotation from ground points"),
            std::make_shared<Common>(), {}};
  c.app->add_option("--points", o->points, "Points JSON with observations")->required()->check(CLI::ExistingFile);
  c.app->add_option("--cameras", o->cameras, "Cameras JSON")->required()->check(CLI::ExistingFile);
  c.app->add_option("--masks", o->masks, "Ground-mask manifest JSON")->required()->check(CLI::ExistingFile);
  c.app->add_option("--ground-fraction", o->ground_fraction, "Min fraction of ground observations");
  c.app->add_option("--plane-threshold", o->plane_threshold, "Plane inlier threshold (default 1% of bbox diagonal)");
  c.app->add_option("--plane-iterations", o->plane_iterations, "Plane RANSAC iterations");
  c.app->add_option("--rays-per-axis", o->rays.rays_per_axis, "Ray grid size per camera axis");
  c.app->add_option("--fov-deg", o->rays.field_of_view_deg, "Camera field of view, degrees");
  c.app->add_option("--out", o->out, "Output JSON")->required();
  auto common = c.common;
  c.body = [o, common](Run& run) {
    const auto points = observed_points_from_json(load_json(run, o->points));
    const auto cameras = cameras_from_json(load_json(run, o->cameras));
    const auto masks = read_mask_manifest(o->masks, &run.inputs);
    const Points3d ground = select_ground_points(points, masks, o->ground_fraction);
    const double threshold = o->plane_threshold.value_or(default_plane_threshold(ground));
    const PlaneFit fit = ransac_plane(ground, threshold, o->plane_iterations, common->seed);
    const UpVote vote = disambiguate_up(fit.plane, cameras, o->rays);
    const Sim3d rot = z_up_rotation(vote.up);
    const json j = {{"up", vec_json(vote.up)},
                    {"plane", {{"normal", vec_json(fit.plane.normal)}, {"offset", fit.plane.offset}}},
                    {"plane_threshold", threshold},
                    {"ground_point_count", ground.cols()},
                    {"plane_inlier_count", fit.inlier_count},
                    {"votes_for", vote.votes_for},
                    {"votes_against", vote.votes_against},
                    {"z_up_transform", to_json(LabelledSim3{rot, "model", "model_z_up"})}};
    emit(run, j, o->out);
    run.summary = {{"up", vec_json(vote.up)}, {"ground_point_count", ground.cols()}};
  };
  return c;
}

Command air2sat_cmd(CLI::App& app) {
  struct Opts {
    FlowPaths flows;
    std::string xyz, dsm, dsm_meta, out, report;
    FilterConfig filter;
    RansacConfig ransac;
  };
  auto o = std::make_shared<Opts>();
  o->ransac.inlier_threshold = kAirToSatInlierThreshold;
  Command c{app.add_subcommand("register-air2sat", "Register an airborne model to a satellite DSM"),
            std::make_shared<Common>(), {}};
  add_flow_options(c.app, o->flows);
  c.app->add_option("--xyz", o->xyz, "Airborne XYZ image (Xyz3, A-shaped)")->required()->check(CLI::ExistingFile);
  c.app->add_option("--dsm", o->dsm, "Satellite DSM (Dsm1, B-shaped)")->required()->check(CLI::ExistingFile);
  c.app->add_option("--dsm-meta", o->dsm_meta, "DSM sidecar (default <dsm>.meta.json)")->check(CLI::ExistingFile);
  add_filter_options(c.app, o->filter);
  add_ransac_options(c.app, o->ransac);
  c.app->add_option("--out", o->out, "Output Sim3 JSON")->required();
  c.app->add_option("--report", o->report, "Optional statistics JSON");
  auto common = c.common;
  c.body = [o, common](Run& run) {
    const FlowPair fp = load_flows(run, o->flows);
    const Raster xyz = load(run, o->xyz);
    const Raster dsm = load(run, o->dsm);
    const fs::path meta_path = o->dsm_meta.empty() ? sidecar_path(o->dsm) : fs::path(o->dsm_meta);
    run.inputs.push_back(meta_path);
    const RasterMetadata meta = read_metadata(meta_path);
    if (!meta.geotransform) {
      throw Error(ErrorCode::kFormatError, "raster_io", meta_path.string() + " has no geotransform");
    }
    FilterConfig fc = o->filter;
    fc.seed = common->seed;
    RansacConfig rc = o->ransac;
    rc.seed = common->seed;
    const AirToSatResult r = register_air_to_sat(fp, xyz, dsm, *meta.geotransform, fc, rc);
    emit(run, to_json(LabelledSim3{r.transform, "air_model", "geo"}), o->out);
    if (!o->report.empty()) emit(run, to_json(r), o->report);
    run.summary = to_json(r);
    run.summary.erase("transform");
  };
  return c;
}

Command ground2air_cmd(CLI::App& app) {
  struct Opts {
    std::string pairs, out, ledger;
    GroundToAirConfig cfg;
    SubgraphGateConfig gate;
  };
  auto o = std::make_shared<Opts>();
  Command c{app.add_subcommand("register-ground2air", "Exhaustive tile matching and consensus"),
            std::make_shared<Common>(), {}};
  c.app->add_option("--pairs", o->pairs, "Pair manifest JSON")->required()->check(CLI::ExistingFile);
  c.app->add_option("--top-k", o->cfg.top_k, "Tiles fitted per ground image");
  c.app->add_option("--inlier-threshold", o->cfg.inlier_threshold, "Inlier threshold, m");
  c.app->add_option("--max-iterations", o->cfg.ransac.max_iterations, "RANSAC iteration cap");
  c.app->add_option("--confidence", o->cfg.ransac.confidence, "RANSAC stopping confidence");
  add_filter_options(c.app, o->cfg.filter);
  c.app->add_option("--min-cameras", o->gate.min_cameras, "Subgraph gate: minimum cameras");
  c.app->add_option("--min-inlier-fraction", o->gate.min_inlier_fraction, "Subgraph gate: minimum inlier fraction");
  c.app->add_option("--out", o->out, "Output Sim3 JSON")->required();
  c.app->add_option("--ledger", o->ledger, "Candidate ledger JSON");
  auto common = c.common;
  c.body = [o, common](Run& run) {
    const GroundAirInputs in = read_ground_air_manifest(o->pairs);
    run.inputs.insert(run.inputs.end(), in.files.begin(), in.files.end());
    GroundToAirConfig cfg = o->cfg;
    cfg.filter.seed = common->seed;
    cfg.ransac.seed = common->seed;
    const GroundToAirResult r = register_ground_to_air(in.pairs, in.ground_xyz, in.tile_xyz, cfg);
    const GateDecision gate = gate_subgraph(r.camera_count, r.final_inlier_fraction, o->gate);
    emit(run, to_json(LabelledSim3{r.transform, "ground_model", "air_model"}), o->out);
    if (!o->ledger.empty()) {
      json ledger = to_json(r);
      ledger["gate"] = to_json(gate);
      emit(run, ledger, o->ledger);
    }
    run.summary = {{"pooled_count", r.pooled_count},
                   {"final_inlier_count", r.final_inlier_count},
                   {"final_inlier_fraction", r.final_inlier_fraction},
                   {"camera_count", r.camera_count},
                   {"candidate_count", r.candidates.size()},
                   {"gate", to_json(gate)}};
  };
  return c;
}

Command icp_cmd(CLI::App& app) {
  struct Opts {
    std::string source, target, init, out, trace;
    IcpConfig cfg;
    std::optional<double> tukey_k, radius;
  };
  auto o = std::make_shared<Opts>();
  Command c{app.add_subcommand("icp-refine", "Tukey-robust point-to-point ICP"), std::make_shared<Common>(), {}};
  c.app->add_option("--source", o->source, "Source cloud (CSV x,y,z or Xyz3 .grr)")->required()->check(CLI::ExistingFile);
  c.app->add_option("--target", o->target, "Target cloud")->required()->check(CLI::ExistingFile);
  c.app->add_option("--init", o->init, "Initial Sim3 JSON (default identity)")->check(CLI::ExistingFile);
  c.app->add_option("--max-iterations", o->cfg.max_iterations, "Iteration cap");
  c.app->add_option("--tukey-k", o->tukey_k, "Tukey scale, m (default 3x median residual)");
  c.app->add_option("--radius", o->radius, "Correspondence radius, m (default 5k)");
  c.app->add_option("--translation-tol", o->cfg.translation_tol_m, "Convergence tolerance, m");
  c.app->add_option("--rotation-tol-deg", o->cfg.rotation_tol_deg, "Convergence tolerance, degrees");
  c.app->add_flag("--estimate-scale", o->cfg.estimate_scale, "Also refine scale");
  c.app->add_option("--out", o->out, "Output Sim3 JSON")->required();
  c.app->add_option("--trace", o->trace, "Objective trace JSON");
  c.body = [o](Run& run) {
    run.inputs.push_back(o->source);
    run.inputs.push_back(o->target);
    const Points3d src = read_point_cloud(o->source);
    const Points3d dst = read_point_cloud(o->target);
    LabelledSim3 init{Sim3d(), "source", "target"};
    if (!o->init.empty()) init = sim3_from_json(load_json(run, o->init));
    IcpConfig cfg = o->cfg;
    cfg.tukey_k = o->tukey_k;
    cfg.correspondence_radius = o->radius;
    const IcpResult r = icp_refine(src, dst, init.transform, cfg);
    emit(run, to_json(LabelledSim3{r.transform, init.source_frame, init.target_frame}), o->out);
    run.summary = {{"iterations", r.iterations},
                   {"converged", r.converged},
                   {"tukey_k", r.tukey_k},
                   {"correspondence_radius", r.correspondence_radius},
                   {"matched_count", r.matched_count},
                   {"final_objective", r.objective_trace.back()}};
    if (!o->trace.empty()) {
      json t = run.summary;
      t["objective_trace"] = r.objective_trace;
      emit(run, t, o->trace);
    }
  };
  return c;
}

Command evaluate_cmd(CLI::App& app) {
  struct Opts {
    std::string est, truth, cov, transform, anchor, out;
    std::optional<double> standoff, inlier_fraction;
  };
  auto o = std::make_shared<Opts>();
  Command c{app.add_subcommand("evaluate", "Camera-position error report"), std::make_shared<Common>(), {}};
  c.app->add_option("--est", o->est, "Estimated cameras JSON")->required()->check(CLI::ExistingFile);
  c.app->add_option("--truth", o->truth, "Truth cameras JSON {id, lat, lon, alt}")->required()->check(CLI::ExistingFile);
  c.app->add_option("--cov", o->cov, "DSM covariance JSON, or the DSM sidecar (also supplies the anchor)")->required()->check(CLI::ExistingFile);
  c.app->add_option("--transform", o->transform, "Sim3 applied to center_xyz estimates")->check(CLI::ExistingFile);
  c.app->add_option("--anchor", o->anchor, "ENU anchor lat,lon,alt");
  c.app->add_option("--standoff", o->standoff, "Mean standoff, m, for per-metre error");
  c.app->add_option("--inlier-fraction", o->inlier_fraction, "Inlier fraction to record");
  c.app->add_option("--out", o->out, "Output report JSON (default: stdout)");
  c.body = [o](Run& run) {
    const json truth_j = load_json(run, o->truth);
    const json cov_j = load_json(run, o->cov);
    // Anchor: explicit flag, else the DSM frame named by the covariance file
    // (sidecar geotransform or a "geodetic_anchor" key), else the first
    // truth camera.
    GeodeticPoint anchor;
    if (!o->anchor.empty()) {
      const Vec3 a = parse_vec3(o->anchor, "--anchor");
      anchor = {a.x(), a.y(), a.z()};
    } else if (cov_j.is_object() && cov_j.contains("geotransform")) {
      anchor = geotransform_from_json(cov_j.at("geotransform")).geodetic_anchor;
    } else if (cov_j.is_object() && cov_j.contains("geodetic_anchor")) {
      const json& a = cov_j.at("geodetic_anchor");
      anchor = {a.at("lat").get<double>(), a.at("lon").get<double>(), a.at("alt").get<double>()};
      georeg::validate(anchor);
    } else {
      anchor = first_truth_camera(truth_j);
    }
    Sim3d transform;
    if (!o->transform.empty()) transform = sim3_from_json(load_json(run, o->transform)).transform;
    const DsmCovariance cov =
        covariance_from_json(cov_j.is_object() && cov_j.contains("covariance") ? cov_j.at("covariance") : cov_j);
    const auto truth = truth_cameras_from_json(truth_j, anchor);
    const auto est = estimated_cameras_from_json(load_json(run, o->est), transform, anchor);
    RegistrationReport report = evaluate_cameras(est, truth, cov);
    report.inlier_fraction = o->inlier_fraction;
    json j = to_json(report);
    j["anchor"] = {{"lat", anchor.latitude_deg}, {"lon", anchor.longitude_deg}, {"alt", anchor.altitude_m}};
    if (o->standoff) j["relative_error_per_metre"] = normalize_by_standoff(report, *o->standoff);
    if (o->out.empty()) {
      run.summary = j;
      return;
    }
    emit(run, j, o->out);
    run.summary = {{"mean_absolute_error", report.mean_absolute_error},
                   {"mean_relative_error", report.mean_relative_error},
                   {"mahalanobis_distance", report.mahalanobis_distance},
                   {"ce90", report.ce90},
                   {"le90", report.le90}};
  };
  return c;
}

Command synth_cmd(CLI::App& app) {
  struct Opts {
    std::string spec, out;
  };
  auto o = std::make_shared<Opts>();
  Command c{app.add_subcommand("synth", "Generate a synthetic scene"), std::make_shared<Common>(), {}};
  c.app->add_option("--spec", o->spec, "Scene JSON")->required()->check(CLI::ExistingFile);
  c.app->add_option("--out", o->out, "Output directory")->required();
  auto common = c.common;
  CLI::App* sub = c.app;
  c.body = [o, common, sub](Run& run) {
    json spec = load_json(run, o->spec);
    if (sub->get_option("--seed")->count() > 0) spec["seed"] = common->seed;
    const std::string kind = synth::scene_kind(spec);
    std::vector<std::string> files;
    if (kind == "air2sat") {
      files = synth::write_scene(synth::generate_air_sat_scene(synth::air_sat_spec_from_json(spec)), o->out);
    } else if (kind == "ground2air") {
      files = synth::write_scene(synth::generate_ground_air_scene(synth::ground_air_spec_from_json(spec)), o->out);
    } else if (kind == "gravity") {
      files = synth::write_scene(synth::generate_gravity_scene(synth::gravity_spec_from_json(spec)), o->out);
    } else {
      throw Error(ErrorCode::kInvalidArgument, "synth", "unknown scene kind '" + kind + "'");
    }
    for (const auto& f : files) run.outputs.push_back(fs::path(o->out) / f);
    run.summary = {{"kind", kind}, {"file_count", files.size()}};
  };
  return c;
}

Command tile_plan_cmd(CLI::App& app) {
  struct Opts {
    int height = 2048, width = 2048, tile = 300, renders = 1;
    double overlap = 0.25;
    std::string out;
  };
  auto o = std::make_shared<Opts>();
  Command c{app.add_subcommand("tile-plan", "Tile grid for airborne renders"), std::make_shared<Common>(), {}};
  c.app->add_option("--height", o->height, "Image height, px");
  c.app->add_option("--width", o->width, "Image width, px");
  c.app->add_option("--tile-size", o->tile, "Tile size, px");
  c.app->add_option("--overlap", o->overlap, "Overlap fraction");
  c.app->add_option("--renders", o->renders, "Number of renders");
  c.app->add_option("--out", o->out, "Output JSON")->required();
  c.body = [o](Run& run) {
    const TileGrid g = make_tile_grid(o->height, o->width, o->tile, o->overlap, o->renders);
    emit(run, to_json(g), o->out);
    run.summary = {{"tile_count", g.tiles.size()}};
  };
  return c;
}

Command oblique_cmd(CLI::App& app) {
  struct Opts {
    std::string center = "0,0,0", out;
    double radius = 100.0;
    ObliqueConfig cfg;
    bool no_nadir = false;
  };
  auto o = std::make_shared<Opts>();
  Command c{app.add_subcommand("oblique-poses", "Oblique render pose specs"), std::make_shared<Common>(), {}};
  c.app->add_option("--center", o->center, "Scene centre x,y,z");
  c.app->add_option("--radius", o->radius, "Scene radius, m");
  c.app->add_option("--azimuth-step", o->cfg.azimuth_step_deg, "Azimuth step, degrees");
  c.app->add_option("--depression", o->cfg.depression_deg, "Depression angle, degrees");
  c.app->add_option("--resolution", o->cfg.resolution_px, "Render resolution, px");
  c.app->add_flag("--no-nadir", o->no_nadir, "Omit the nadir pose");
  c.app->add_option("--out", o->out, "Output JSON")->required();
  c.body = [o](Run& run) {
    ObliqueConfig cfg = o->cfg;
    cfg.include_nadir = !o->no_nadir;
    const ObliqueViewSet v = oblique_poses(parse_vec3(o->center, "--center"), o->radius, cfg);
    emit(run, to_json(v), o->out);
    run.summary = {{"pose_count", v.poses.size()}};
  };
  return c;
}

// Expands `--config file.json` into flags placed right after the subcommand
// name, so flags given on the command line come later and win.
std::vector<std::string> expand_config(const std::vector<std::string>& args,
                                       const std::vector<std::string>& names) {
  std::size_t sub = 0;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (std::find(names.begin(), names.end(), args[i]) != names.end()) {
      sub = i;
      break;
    }
  }
  if (sub == 0) return args;
  std::string path;
  for (std::size_t i = sub + 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  if (!fs::exists(path)) {
    throw CLI::ValidationError("--config", "File does not exist: " + path);
  }
  const json cfg = read_json_file(path);
  if (!cfg.is_object()) throw CLI::ValidationError("--config", "config must be a JSON object");
  std::vector<std::string> extra;
  for (const auto& [key, value] : cfg.items()) {
    if (key == "config") continue;
    const std::string flag = "--" + key;
    if (value.is_boolean()) {
      if (value.get<bool>()) extra.push_back(flag);
    } else if (value.is_string()) {
      extra.insert(extra.end(), {flag, value.get<std::string>()});
    } else if (value.is_number()) {
      extra.insert(extra.end(), {flag, value.dump()});
    } else if (value.is_array()) {
      std::string joined;
      for (const auto& v : value) joined += (joined.empty() ? "" : ",") + (v.is_string() ? v.get<std::string>() : v.dump());
      extra.insert(extra.end(), {flag, joined});
    } else {
      throw CLI::ValidationError("--config", "unsupported value for '" + key + "'");
    }
  }
  std::vector<std::string> out(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(sub) + 1);
  out.insert(out.end(), extra.begin(), extra.end());
  out.insert(out.end(), args.begin() + static_cast<std::ptrdiff_t>(sub) + 1, args.end());
  return out;
}

json snapshot(const CLI::App* sub) {
  json j = json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name == "config" || name == "manifest") continue;
    if (opt->count() > 0) {
      const auto& res = opt->results();
      j[name] = res.empty() ? std::string("true") : res.back();
    } else {
      j[name] = opt->get_default_str();
    }
  }
  return j;
}

fs::path default_manifest(const Run& run, const CLI::App* sub) {
  const CLI::Option* out = sub->get_option_no_throw("--out");
  if (out == nullptr || out->count() == 0) return "georeg_manifest.json";
  const fs::path p = out->results().back();
  if (fs::is_directory(p)) return p / "manifest.json";
  (void)run;
  return fs::path(p.string() + ".manifest.json");
}

void write_manifest(const Run& run, const CLI::App* sub, const Common& common,
                    const std::vector<std::string>& args, double wall_s) {
  json inputs = json::array();
  for (const auto& p : run.inputs) inputs.push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
  json outputs = json::array();
  for (const auto& p : run.outputs) outputs.push_back(p.string());
  const json m = {{"tool", "georeg"},
                  {"version", tool_version()},
                  {"command", sub->get_name()},
                  {"argv", args},
                  {"config", snapshot(sub)},
                  {"inputs", inputs},
                  {"outputs", outputs},
                  {"seed", common.seed},
                  {"threads", common.threads},
                  {"wall_time_s", wall_s}};
  write_json_file(m, run.manifest_path);
}

json error_json(const std::string& stage, std::string_view code, const std::string& message) {
  return {{"stage", stage}, {"code", code}, {"message", message}};
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Metadata-free georegistration geometric core", "georeg"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->always_capture_default();
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(tool_version()));

  std::vector<Command> commands;
  for (auto make : {filter_matches_cmd, estimate_gravity_cmd, air2sat_cmd, ground2air_cmd, icp_cmd,
                    evaluate_cmd, synth_cmd, tile_plan_cmd, oblique_cmd}) {
    commands.push_back(make(app));
  }
  std::vector<std::string> names;
  for (auto& c : commands) {
    add_common(c.app, *c.common);
    names.push_back(c.app->get_name());
  }

  std::vector<std::string> expanded;
  try {
    expanded = expand_config(args, names);
    std::vector<std::string> reversed(expanded.rbegin(), expanded.rend() - 1);
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);  // --help, --version
      return kExitOk;
    }
    err << error_json("cli", to_string(ErrorCode::kInvalidArgument), e.what()).dump() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << error_json(e.stage(), to_string(e.code()), e.what()).dump() << '\n';
    return kExitUsage;
  }

  for (auto& c : commands) {
    if (!c.app->parsed()) continue;
    const auto start = std::chrono::steady_clock::now();
    try {
      ThreadLimit limit(c.common->threads);
      Run run;
      c.body(run);
      run.manifest_path = c.common->manifest.empty() ? default_manifest(run, c.app) : fs::path(c.common->manifest);
      const double wall =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      write_manifest(run, c.app, *c.common, expanded, wall);
      out << run.summary.dump() << '\n';
      return kExitOk;
    } catch (const Error& e) {
      err << error_json(e.stage(), to_string(e.code()), e.what()).dump() << '\n';
      return is_data_error(e.code()) ? kExitDataError : kExitUsage;
    } catch (const json::exception& e) {
      err << error_json("cli", to_string(ErrorCode::kFormatError), e.what()).dump() << '\n';
      return kExitDataError;
    } catch (const std::exception& e) {
      err << error_json("cli", to_string(ErrorCode::kIoError), e.what()).dump() << '\n';
      return kExitDataError;
    }
  }
  return kExitUsage;
}

}  // namespace georeg
