// nptc: stage-wise command line for the NPTC pipeline.
//
// Geometry stages pass binary artifacts along (band -> distance -> frames ->
// operator); each artifact records the content hash of the files it was
// derived from and downstream stages refuse inputs whose hash changed.

#include <CLI11.hpp>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nptc/artifacts.hpp"
#include "nptc/error.hpp"
#include "nptc/gradcheck.hpp"
#include "nptc/hash.hpp"
#include "nptc/hierarchy.hpp"
#include "nptc/parallel.hpp"
#include "nptc/run_config.hpp"
#include "nptc/synthetic.hpp"
#include "nptc/train.hpp"

namespace fs = std::filesystem;
using namespace nptc;

namespace {

// Flags bound to optionals so only values given on the command line are
// applied; the --config file is layered on top afterwards.
struct CommonFlags {
  std::optional<unsigned> threads;
  std::string config_path;
  std::optional<std::string> cache;
};

struct PipelineFlags {
  std::optional<int> res;
  std::optional<std::string> eps;
  std::optional<std::string> seed_policy;
  std::optional<std::string> seed_face;
  std::optional<std::size_t> k;
  std::optional<std::string> normals;
  std::optional<int> taps;
  std::optional<std::string> delta;
  std::optional<double> alpha;
};

template <typename T, typename U>
void set_if(const std::optional<T>& flag, U& field) {
  if (flag) field = *flag;
}

std::optional<double> parse_auto(const std::string& text, const std::string& flag) {
  if (text == "auto") return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("--" + flag + " expects a number or 'auto', got '" + text + "'");
}

NormalPolicy parse_normals(const std::string& text) {
  if (text == "input") return NormalPolicy::UseInput;
  if (text == "lpca") return NormalPolicy::LpcaCentroidOriented;
  throw ConfigError("--normals expects input or lpca, got '" + text + "'");
}

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--threads", f.threads, "Worker thread cap")->check(CLI::PositiveNumber);
  cmd->add_option("--config", f.config_path, "JSON run config; overrides flags");
  cmd->add_option("--cache", f.cache, "Cache root (default $NPTC_CACHE_DIR)");
}

RunConfig resolve(const CommonFlags& common, const PipelineFlags& p) {
  RunConfig rc;
  set_if(common.threads, rc.threads);
  set_if(common.cache, rc.cache_dir);
  set_if(p.res, rc.pipeline.resolution);
  if (p.eps) rc.pipeline.epsilon = parse_auto(*p.eps, "eps");
  if (p.seed_policy) rc.pipeline.seed = parse_seed_policy(*p.seed_policy);
  if (p.seed_face) rc.pipeline.seed = parse_seed_policy("face:" + *p.seed_face);
  set_if(p.k, rc.pipeline.k);
  if (p.normals) rc.pipeline.normals = parse_normals(*p.normals);
  set_if(p.taps, rc.pipeline.kernel.taps_per_axis);
  if (p.delta) rc.pipeline.kernel.delta = parse_auto(*p.delta, "delta");
  set_if(p.alpha, rc.pipeline.kernel.alpha);
  if (!common.config_path.empty()) rc = load_run_config(common.config_path, rc);
  set_thread_count(rc.threads);
  return rc;
}

fs::path cache_root(const RunConfig& rc) {
  if (!rc.cache_dir.empty()) return rc.cache_dir;
  if (const char* env = std::getenv("NPTC_CACHE_DIR"); env && *env) return env;
  return "nptc_cache";
}

// Explicit --out, else <cache root>/<stem of the main input><ext>.
std::string output_path(const std::string& out, const RunConfig& rc,
                        const std::string& input, const std::string& ext) {
  if (!out.empty()) return out;
  const fs::path root = cache_root(rc);
  fs::create_directories(root);
  return (root / (fs::path(input).stem().string() + ext)).string();
}

Upstream upstream_of(const std::string& role, const std::string& path) {
  if (!fs::exists(path)) throw CacheMiss("missing upstream file " + path);
  return {role, hash_file(path)};
}

std::uint64_t combine(std::initializer_list<std::uint64_t> parts) {
  Fnv1a h;
  for (auto p : parts) h.update_value(p);
  return h.digest();
}

// Whitespace-separated numeric rows.
Tensor2<double> read_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CacheMiss("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::vector<double> row;
    std::string tok;
    while (ss >> tok) {
      try {
        row.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw ParseError(path + ":" + std::to_string(line_no) + ": bad number '" + tok + "'");
      }
    }
    if (!rows.empty() && row.size() != rows[0].size())
      throw ParseError(path + ":" + std::to_string(line_no) + ": ragged row");
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(path + ": no rows");
  Tensor2<double> m(static_cast<Index>(rows.size()), static_cast<Index>(rows[0].size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  return m;
}

void write_matrix(const Tensor2<double>& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << std::setprecision(17);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) out << (j ? " " : "") << m(i, j);
    out << '\n';
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << text << '\n';
}

// ---------------------------------------------------------------- geometry

void run_voxelize(const RunConfig& rc, const std::string& in, const std::string& out,
                  const std::string& dump) {
  const auto up = upstream_of("cloud", in);
  BandArtifact a;
  a.upstream = {up};
  a.cloud = normalize_to_unit_cube(load_cloud(in));
  a.band = voxelize_narrowband(a.cloud, rc.pipeline.resolution, rc.pipeline.resolved_epsilon());
  const auto path = output_path(out, rc, in, ".nb");
  save_band(a, path);
  if (!dump.empty()) {
    std::ofstream d(dump);
    if (!d) throw IoError("cannot write " + dump);
    d << std::setprecision(17);
    const auto m = static_cast<std::uint32_t>(a.band.grid.resolution);
    for (std::size_t s = 0; s < a.band.size(); ++s) {
      const auto id = a.band.active[s];
      d << id / (m * m) << ' ' << (id / m) % m << ' ' << id % m << ' '
        << a.band.dist_to_cloud[s] << '\n';
    }
  }
  std::cout << "band " << path << " voxels " << a.band.size() << " epsilon "
            << a.band.epsilon << '\n';
}

void run_distance(const RunConfig& rc, const std::string& band_path, const std::string& out) {
  const auto band = load_band(band_path);
  DistanceArtifact a;
  a.upstream = {upstream_of("band", band_path)};
  a.seeds = select_seed(band.band, band.cloud, rc.pipeline.seed);
  a.grid = fast_marching(band.band, a.seeds);
  a.points = interpolate_to_points(a.grid, band.band, band.cloud);
  const auto path = output_path(out, rc, band_path, ".gsf");
  save_distance(a, path);
  std::size_t outside = 0;
  for (auto o : a.points.out_of_band) outside += o;
  std::cout << "distance " << path << " seed " << to_string(rc.pipeline.seed)
            << " out_of_band " << outside << '\n';
}

void run_frames(const RunConfig& rc, const std::string& band_path,
                const std::string& dist_path, const std::string& out) {
  const auto band = load_band(band_path);
  const auto dist = load_distance(dist_path);
  require_upstream(dist.upstream, "band", band_path);
  FramesArtifact a;
  a.upstream = {upstream_of("band", band_path), upstream_of("distance", dist_path)};
  a.k = static_cast<std::uint32_t>(rc.pipeline.k);
  a.policy = rc.pipeline.normals;
  const NeighborIndex index(band.cloud.points);
  a.frames = build_frame_field(band.cloud, index, dist.points, rc.pipeline.k,
                               rc.pipeline.normals, dist.seeds.point_index);
  const auto path = output_path(out, rc, band_path, ".frames");
  save_frames(a, path);
  std::cout << "frames " << path << " singular " << a.frames.singular_count << '\n';
}

// Frames (and optional output indices) checked against the band they came from.
struct OperatorInputs {
  BandArtifact band;
  FramesArtifact frames;
  std::vector<std::uint32_t> out_indices;
  std::uint64_t hash = 0;
};

OperatorInputs load_operator_inputs(const std::string& band_path, const std::string& frames_path,
                                    const std::string& indices_path) {
  OperatorInputs in;
  in.band = load_band(band_path);
  in.frames = load_frames(frames_path);
  require_upstream(in.frames.upstream, "band", band_path);
  in.hash = hash_file(frames_path);
  if (!indices_path.empty()) {
    Upstream up;
    in.out_indices = load_indices(indices_path, &up);
    require_upstream({up}, "band", band_path);
    in.hash = combine({in.hash, hash_file(indices_path)});
  } else {
    in.out_indices.resize(in.band.cloud.size());
    for (std::uint32_t i = 0; i < in.out_indices.size(); ++i) in.out_indices[i] = i;
  }
  return in;
}

void run_op_build(const RunConfig& rc, const std::string& band_path,
                  const std::string& frames_path, const std::string& indices_path,
                  const std::string& out) {
  const auto in = load_operator_inputs(band_path, frames_path, indices_path);
  const NeighborIndex index(in.band.cloud.points);
  const auto op = build_operator(index, in.frames.frames.frames, in.out_indices,
                                 rc.pipeline.kernel);
  const auto path = output_path(out, rc, band_path, ".op");
  save_operator(op, path, in.hash);
  std::cout << "operator " << path << " outputs " << op.out_size() << " taps "
            << op.tap_count() << " delta " << op.delta << '\n';
}

void run_conv(const std::string& band_path, const std::string& frames_path,
              const std::string& indices_path, const std::string& op_path,
              const std::string& features_path, const std::string& weights_path,
              int out_channels, std::uint64_t seed, const std::string& out) {
  const auto in = load_operator_inputs(band_path, frames_path, indices_path);
  std::uint64_t recorded = 0;
  const auto op = load_operator(op_path, &recorded);
  if (recorded != in.hash)
    throw CacheMiss(op_path + " was built from different frames or indices; rerun op-build");
  const Tensor2<double> features = features_path.empty()
                                       ? coordinate_features(in.band.cloud.points)
                                       : read_matrix(features_path);
  if (features.rows() != static_cast<Index>(op.input_size))
    throw ShapeError(features_path + ": expected " + std::to_string(op.input_size) + " rows");
  Tensor2<double> weights;
  if (!weights_path.empty()) {
    weights = read_matrix(weights_path);
  } else {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0 / std::sqrt(double(op.tap_count() * features.cols())));
    weights.resize(op.tap_count() * features.cols(), out_channels);
    for (Index i = 0; i < weights.size(); ++i) weights.data()[i] = g(rng);
  }
  if (weights.rows() != op.tap_count() * features.cols())
    throw ShapeError("weights need " + std::to_string(op.tap_count() * features.cols()) + " rows");
  const auto result = apply(op, weights, features);
  write_matrix(result, out);
  std::cout << "conv " << out << " " << result.rows() << "x" << result.cols() << '\n';
}

void run_fps(const RunConfig& rc, const std::string& band_path, std::size_t n,
             std::uint32_t start, const std::string& out) {
  const auto band = load_band(band_path);
  std::vector<std::uint32_t> all(band.cloud.size());
  for (std::uint32_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto picks = farthest_point_sampling(band.cloud.points, all, n, start);
  const auto path = output_path(out, rc, band_path, ".fps");
  save_indices(picks, upstream_of("band", band_path), path);
  std::cout << "fps " << path << " points " << picks.size() << '\n';
}

void run_export_ply(const std::string& band_path, const std::string& dist_path,
                    const std::string& frames_path, const std::string& out) {
  const auto band = load_band(band_path);
  const auto dist = load_distance(dist_path);
  require_upstream(dist.upstream, "band", band_path);
  // Out-of-band points have no distance; color them like the farthest point.
  double far = 0.0;
  for (double v : dist.points.value)
    if (std::isfinite(v)) far = std::max(far, v);
  std::vector<double> scalars(dist.points.value);
  for (double& v : scalars)
    if (!std::isfinite(v)) v = far;
  std::vector<PlyProperty> extra;
  extra.push_back({"rho", scalars});
  extra.push_back({"out_of_band", {dist.points.out_of_band.begin(), dist.points.out_of_band.end()}});
  if (!frames_path.empty()) {
    const auto frames = load_frames(frames_path);
    require_upstream(frames.upstream, "band", band_path);
    require_upstream(frames.upstream, "distance", dist_path);
    for (int c = 0; c < 3; ++c) {
      PlyProperty p{std::string("u1") + "xyz"[c], {}};
      for (const auto& f : frames.frames.frames) p.values.push_back(f.u1[c]);
      extra.push_back(std::move(p));
    }
  }
  export_ply_with_scalars(band.cloud, scalars, out, extra);
  std::cout << "ply " << out << " points " << band.cloud.size() << '\n';
}

// ---------------------------------------------------------------- learning

// Loads the requested split and prepares (or reuses cached) geometry.
std::vector<Sample> load_samples(const RunConfig& rc, const Manifest& manifest, bool train_split) {
  std::vector<const ManifestEntry*> picked;
  for (const auto& e : manifest.entries)
    if (e.train == train_split) picked.push_back(&e);
  // Without an explicit root, geometry is cached next to the run outputs.
  const char* env = std::getenv("NPTC_CACHE_DIR");
  const fs::path cache = !rc.cache_dir.empty() || (env && *env)
                             ? cache_root(rc)
                             : fs::path(rc.output_dir) / "cache";
  fs::create_directories(cache);
  const std::uint64_t config_hash = fingerprint(rc.pipeline);
  const bool segmentation = rc.network.task == Task::Segmentation;
  std::vector<Sample> samples(picked.size());
  parallel_for(0, picked.size(), [&](std::size_t i) {
    const ManifestEntry& e = *picked[i];
    const std::uint64_t cloud_hash = hash_file(e.cloud);
    const std::uint64_t key = combine({cloud_hash, config_hash});
    const auto path = (cache / (hash_hex(cloud_hash) + "_" + hash_hex(config_hash) + ".geo")).string();
    std::shared_ptr<CloudGeometry> geometry;
    try {
      geometry = std::make_shared<CloudGeometry>(load_geometry(path, key));
    } catch (const CacheMiss&) {
      const auto cloud = normalize_to_unit_cube(load_cloud(e.cloud));
      geometry = std::make_shared<CloudGeometry>(prepare_cloud(cloud, rc.pipeline));
      save_geometry(*geometry, path, key);
    }
    Sample& s = samples[i];
    s.name = e.cloud.filename().string();
    s.geometry = std::move(geometry);
    s.label = e.label;
    if (segmentation) {
      if (e.parts.empty()) throw ConfigError("segmentation needs part labels for " + e.cloud.string());
      s.parts = read_parts(e.parts);
      if (s.parts.size() != s.geometry->points.size())
        throw ShapeError(e.parts.string() + ": part count differs from the cloud");
    }
  });
  return samples;
}

Manifest load_manifest_for(const RunConfig& rc) {
  if (rc.dataset_dir.empty()) throw ConfigError("paths.dataset is not set (use --dataset)");
  auto manifest = read_manifest(rc.dataset_dir);
  if (rc.network.task == Task::Classification &&
      static_cast<int>(manifest.classes.size()) != rc.network.num_classes)
    throw ConfigError("network.num_classes is " + std::to_string(rc.network.num_classes) +
                      " but the dataset has " + std::to_string(manifest.classes.size()) +
                      " classes");
  return manifest;
}

struct LearnFlags {
  std::optional<std::string> dataset;
  std::optional<std::string> out;
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr;
  std::optional<int> batch;
  std::optional<int> voting;
  std::optional<std::string> task;
  std::optional<int> res;
};

void apply_learn_flags(const LearnFlags& f, RunConfig& rc) {
  set_if(f.dataset, rc.dataset_dir);
  set_if(f.out, rc.output_dir);
  set_if(f.epochs, rc.train.epochs);
  set_if(f.seed, rc.train.seed);
  set_if(f.lr, rc.train.optimizer.lr);
  set_if(f.batch, rc.train.batch_size);
  set_if(f.voting, rc.train.voting_rounds);
  set_if(f.res, rc.pipeline.resolution);
  if (f.task) {
    if (*f.task == "classification") {
      rc.network.task = Task::Classification;
    } else if (*f.task == "segmentation") {
      rc.network.task = Task::Segmentation;
      rc.network.num_classes = 2;
    } else {
      throw ConfigError("--task expects classification or segmentation");
    }
  }
}

void log_config(const RunConfig& rc, const fs::path& dir) {
  const auto text = dump_run_config(rc);
  std::cout << "resolved config:\n" << text << '\n';
  write_text((dir / "config.json").string(), text);
}

void run_train(const CommonFlags& common, const LearnFlags& flags) {
  RunConfig rc;
  set_if(common.threads, rc.threads);
  set_if(common.cache, rc.cache_dir);
  apply_learn_flags(flags, rc);
  if (!common.config_path.empty()) rc = load_run_config(common.config_path, rc);
  set_thread_count(rc.threads);
  const fs::path dir = rc.output_dir;
  fs::create_directories(dir);
  log_config(rc, dir);

  const auto manifest = load_manifest_for(rc);
  const auto train_set = load_samples(rc, manifest, true);
  const auto eval_set = load_samples(rc, manifest, false);
  if (train_set.empty()) throw ConfigError(rc.dataset_dir + ": no training clouds");

  NptcNet<float> model(rc.network);
  model.init(rc.train.seed);
  const auto log = train(model, train_set, eval_set, rc.train, [](const EpochMetrics& m) {
    std::cout << "epoch " << m.epoch << " loss " << m.loss << " accuracy " << m.accuracy << '\n';
  });
  write_metrics_csv(log, (dir / "metrics.csv").string());
  save_checkpoint(model, dump_run_config(rc), (dir / "model.ckpt").string());
  std::cout << "wrote " << (dir / "metrics.csv").string() << " and "
            << (dir / "model.ckpt").string() << '\n';
}

void run_eval(const CommonFlags& common, const LearnFlags& flags, const std::string& ckpt_path) {
  const auto ckpt = read_checkpoint(ckpt_path);
  RunConfig rc = parse_run_config(ckpt.config_json);
  set_if(common.threads, rc.threads);
  set_if(common.cache, rc.cache_dir);
  apply_learn_flags(flags, rc);
  if (!common.config_path.empty()) rc = load_run_config(common.config_path, rc);
  set_thread_count(rc.threads);
  const fs::path dir = rc.output_dir;
  fs::create_directories(dir);
  log_config(rc, dir);

  NptcNet<float> model(rc.network);
  load_parameters(model, ckpt);
  const auto manifest = load_manifest_for(rc);
  const auto test_set = load_samples(rc, manifest, false);
  if (test_set.empty()) throw ConfigError(rc.dataset_dir + ": no test clouds");

  // A single round scores the plain cloud, as during training; voting
  // averages augmented passes.
  AugmentConfig augment = rc.train.augment;
  if (rc.train.voting_rounds == 1) augment.enabled = false;
  double loss = 0.0, correct = 0.0, total = 0.0;
  for (const auto& s : test_set) {
    const auto probs = predict_with_voting(model, s, rc.train.voting_rounds, rc.train.seed,
                                           augment);
    for (Index r = 0; r < probs.rows(); ++r) {
      const int truth = s.parts.empty() ? s.label : s.parts[r];
      Index best = 0;
      probs.row(r).maxCoeff(&best);
      correct += best == truth;
      loss -= std::log(std::max(probs(r, truth), 1e-300));
      total += 1.0;
    }
  }
  EpochMetrics m;
  m.epoch = rc.train.epochs;
  m.loss = loss / total;
  m.accuracy = correct / total;
  write_metrics_csv({m}, (dir / "eval.csv").string());
  std::cout << "eval loss " << m.loss << " accuracy " << m.accuracy << " clouds "
            << test_set.size() << '\n';
}

void run_gradcheck(std::uint64_t seed, double tolerance) {
  std::string worst;
  for (const auto& r : check_all(seed)) {
    std::cout << std::left << std::setw(16) << r.fragment << " max_rel "
              << std::scientific << std::setprecision(3) << r.report.max_relative_error
              << std::defaultfloat << " entries " << r.report.entries << " kinks "
              << r.report.kinks << '\n';
    if (!(r.report.max_relative_error <= tolerance)) worst = r.fragment;
  }
  if (!worst.empty()) throw InternalError("gradient check failed for " + worst);
}

std::string one_line(std::string text) {
  for (char& c : text)
    if (c == '\n' || c == '\r') c = ' ';
  return text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NPTC point-cloud convolution pipeline"};
  app.require_subcommand(1);

  CommonFlags common;
  PipelineFlags pipe;
  std::string in, out, band, distance, frames, indices, op, features, weights, dump, checkpoint;

  auto* vox = app.add_subcommand("voxelize", "Narrow band around a point cloud");
  add_common(vox, common);
  vox->add_option("--in", in, "Input cloud (.xyz or .ply)")->required();
  vox->add_option("--res", pipe.res, "Grid resolution M");
  vox->add_option("--eps", pipe.eps, "Band radius or 'auto' (2h)");
  vox->add_option("--out", out, "Band file");
  vox->add_option("--dump", dump, "Text dump 'i j k dist' per active voxel");

  auto* dist = app.add_subcommand("distance", "Geodesic distance by fast marching");
  add_common(dist, common);
  dist->add_option("--band", band)->required();
  dist->add_option("--seed-policy", pipe.seed_policy, "index:<i> or min:<x|y|z>");
  dist->add_option("--seed-face", pipe.seed_face, "<axis>:<low|high> face seed");
  dist->add_option("--out", out, "Distance file");

  auto* frm = app.add_subcommand("frames", "Tangent frames from the distance gradient");
  add_common(frm, common);
  frm->add_option("--band", band)->required();
  frm->add_option("--distance", distance)->required();
  frm->add_option("--k", pipe.k, "Neighbors for LPCA and the gradient fit");
  frm->add_option("--normals", pipe.normals, "input or lpca");
  frm->add_option("--out", out, "Frames file");

  auto* opb = app.add_subcommand("op-build", "NPTC gather operator");
  add_common(opb, common);
  opb->add_option("--band", band)->required();
  opb->add_option("--frames", frames)->required();
  opb->add_option("--indices", indices, "Output points (fps file); default all");
  opb->add_option("--taps", pipe.taps, "Kernel taps per axis K");
  opb->add_option("--delta", pipe.delta, "Tap spacing or 'auto'");
  opb->add_option("--alpha", pipe.alpha, "Auto spacing factor");
  opb->add_option("--out", out, "Operator file");

  int out_channels = 4;
  std::uint64_t conv_seed = 1;
  auto* conv = app.add_subcommand("conv", "Apply an operator to point features");
  add_common(conv, common);
  conv->add_option("--band", band)->required();
  conv->add_option("--frames", frames)->required();
  conv->add_option("--indices", indices);
  conv->add_option("--op", op)->required();
  conv->add_option("--features", features, "N x C text matrix; default coordinates");
  conv->add_option("--weights", weights, "(K^2 C) x C_out text matrix; default random");
  conv->add_option("--out-channels", out_channels)->check(CLI::PositiveNumber);
  conv->add_option("--seed", conv_seed);
  conv->add_option("--out", out)->required();

  std::size_t fps_n = 0;
  std::uint32_t fps_start = 0;
  auto* fps = app.add_subcommand("fps", "Farthest point sampling");
  add_common(fps, common);
  fps->add_option("--band", band)->required();
  fps->add_option("--n", fps_n)->required()->check(CLI::PositiveNumber);
  fps->add_option("--start", fps_start);
  fps->add_option("--out", out, "Index file");

  DatasetSpec data;
  std::size_t per_class = data.clouds_per_class, points = data.points_per_cloud;
  bool no_rotation = false;
  auto* gen = app.add_subcommand("gen-data", "Synthetic sphere/torus/cube dataset");
  add_common(gen, common);
  gen->add_option("--out", out)->required();
  gen->add_option("--clouds-per-class", per_class)->check(CLI::PositiveNumber);
  gen->add_option("--points", points)->check(CLI::PositiveNumber);
  gen->add_option("--seed", data.seed);
  gen->add_option("--train-fraction", data.train_fraction)->check(CLI::Range(0.0, 1.0));
  gen->add_flag("--no-rotation", no_rotation);

  LearnFlags learn;
  auto add_learn = [&](CLI::App* cmd) {
    add_common(cmd, common);
    cmd->add_option("--dataset", learn.dataset, "Directory with manifest.json");
    cmd->add_option("--out", learn.out, "Output directory");
    cmd->add_option("--epochs", learn.epochs);
    cmd->add_option("--seed", learn.seed);
    cmd->add_option("--lr", learn.lr);
    cmd->add_option("--batch", learn.batch);
    cmd->add_option("--voting", learn.voting, "Voting rounds at evaluation");
    cmd->add_option("--task", learn.task, "classification or segmentation");
    cmd->add_option("--res", learn.res, "Grid resolution M");
  };
  auto* trn = app.add_subcommand("train", "Train and write metrics.csv, model.ckpt");
  add_learn(trn);
  auto* evl = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  add_learn(evl);
  evl->add_option("--checkpoint", checkpoint)->required();

  std::uint64_t gc_seed = 1;
  double gc_tol = 1e-4;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every layer");
  add_common(gc, common);
  gc->add_option("--seed", gc_seed);
  gc->add_option("--tolerance", gc_tol);

  auto* ply = app.add_subcommand("export-ply", "Colored PLY of the distance field");
  add_common(ply, common);
  ply->add_option("--band", band)->required();
  ply->add_option("--distance", distance)->required();
  ply->add_option("--frames", frames, "Adds u1x u1y u1z properties");
  ply->add_option("--out", out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "ArgumentError: " << one_line(e.what()) << '\n';
    return 2;
  }

  try {
    if (*trn) {
      run_train(common, learn);
    } else if (*evl) {
      run_eval(common, learn, checkpoint);
    } else {
      const RunConfig rc = resolve(common, pipe);
      if (*vox) run_voxelize(rc, in, out, dump);
      else if (*dist) run_distance(rc, band, out);
      else if (*frm) run_frames(rc, band, distance, out);
      else if (*opb) run_op_build(rc, band, frames, indices, out);
      else if (*conv) run_conv(band, frames, indices, op, features, weights, out_channels, conv_seed, out);
      else if (*fps) run_fps(rc, band, fps_n, fps_start, out);
      else if (*ply) run_export_ply(band, distance, frames, out);
      else if (*gc) run_gradcheck(gc_seed, gc_tol);
      else if (*gen) {
        data.clouds_per_class = per_class;
        data.points_per_cloud = points;
        data.random_rotation = !no_rotation;
        write_dataset(make_dataset(data), out);
        std::cout << "dataset " << out << " clouds " << per_class * data.families.size() << '\n';
      }
    }
  } catch (const Error& e) {
    std::cerr << e.category() << ": " << one_line(e.what()) << '\n';
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "ConfigError: " << one_line(e.what()) << '\n';
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "IoError: " << one_line(e.what()) << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "InternalError: " << one_line(e.what()) << '\n';
    return 1;
  }
  return 0;
}
