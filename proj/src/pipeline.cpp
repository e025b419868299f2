#include "nptc/pipeline.hpp"

#include <filesystem>

#include "nptc/binary_io.hpp"
#include "nptc/error.hpp"
#include "nptc/hash.hpp"

namespace nptc {

namespace {
constexpr std::uint32_t kGeometryVersion = 1;
}

std::uint64_t fingerprint(const PipelineConfig& c) {
  Fnv1a h;
  h.update("pipeline-v1");
  h.update_value(c.resolution);
  h.update_value(c.resolved_epsilon());
  h.update_value(static_cast<int>(c.seed.kind));
  h.update_value(c.seed.point_index);
  h.update_value(c.seed.axis);
  h.update_value(c.seed.high_side);
  h.update_value(c.k);
  h.update_value(static_cast<int>(c.normals));
  h.update_value(c.kernel.taps_per_axis);
  h.update_value(c.kernel.delta.value_or(-1.0));
  h.update_value(c.kernel.alpha);
  for (double r : c.ratios) h.update_value(r);
  h.update_value(c.fps_start);
  return h.digest();
}

GeometryStages compute_frames(const PointCloud& cloud, const NeighborIndex& index,
                              const PipelineConfig& config) {
  GeometryStages s;
  s.band = voxelize_narrowband(cloud, index, config.resolution,
                               config.resolved_epsilon());
  s.seeds = select_seed(s.band, cloud, config.seed);
  s.grid_distance = fast_marching(s.band, s.seeds);
  s.point_distance = interpolate_to_points(s.grid_distance, s.band, cloud);
  s.frames = build_frame_field(cloud, index, s.point_distance, config.k,
                               config.normals, s.seeds.point_index);
  return s;
}

CloudGeometry assemble_geometry(const std::vector<Vec3>& points,
                                const FrameField& frames,
                                const PipelineConfig& config) {
  if (frames.size() != points.size())
    throw ArgumentError("frame field does not match the cloud");
  CloudGeometry g;
  g.points = points;
  g.hierarchy = build_hierarchy(points, config.ratios, config.fps_start);
  for (std::size_t l = 0; l < g.hierarchy.level_count(); ++l) {
    const auto& level = g.hierarchy.levels[l];
    std::vector<TangentFrame> level_frames;
    level_frames.reserve(level.size());
    for (const auto idx : level) level_frames.push_back(frames.frames[idx]);
    const NeighborIndex index(g.hierarchy.level_points(points, l));
    std::vector<std::uint32_t> all(level.size());
    for (std::uint32_t i = 0; i < all.size(); ++i) all[i] = i;
    g.level_ops.push_back(build_operator(index, level_frames, all, config.kernel));
    if (l + 1 < g.hierarchy.level_count()) {
      const auto out = g.hierarchy.positions_in_parent(l + 1);
      g.down_ops.push_back(build_operator(index, level_frames, out, config.kernel));
    }
  }
  return g;
}

CloudGeometry prepare_cloud(const PointCloud& cloud, const PipelineConfig& config) {
  const NeighborIndex index(cloud.points);
  const auto stages = compute_frames(cloud, index, config);
  return assemble_geometry(cloud.points, stages.frames, config);
}

namespace {

void write_operator(BinaryWriter& out, const NptcOperator& op) {
  out.write(op.input_size);
  out.write(static_cast<std::uint32_t>(op.taps_per_axis));
  out.write(op.delta);
  out.write(static_cast<std::uint64_t>(op.out_indices.size()));
  out.write_span(std::span<const std::uint32_t>(op.out_indices));
  out.write_span(std::span<const std::uint32_t>(op.taps));
}

NptcOperator read_operator(BinaryReader& in) {
  NptcOperator op;
  op.input_size = in.read<std::uint32_t>();
  op.taps_per_axis = static_cast<int>(in.read<std::uint32_t>());
  op.delta = in.read<double>();
  const auto out = in.read<std::uint64_t>();
  op.out_indices = in.read_vector<std::uint32_t>(out);
  op.taps = in.read_vector<std::uint32_t>(out * op.tap_count());
  return op;
}

void write_indices(BinaryWriter& out, const std::vector<std::uint32_t>& v) {
  out.write(static_cast<std::uint64_t>(v.size()));
  out.write_span(std::span<const std::uint32_t>(v));
}

std::vector<std::uint32_t> read_indices(BinaryReader& in) {
  const auto n = in.read<std::uint64_t>();
  return in.read_vector<std::uint32_t>(n);
}

}  // namespace

void save_geometry(const CloudGeometry& g, const std::string& path,
                   std::uint64_t upstream_hash) {
  const std::string tmp = path + ".tmp";
  {
    BinaryWriter out(tmp);
    out.write_magic("NPGE");
    out.write(kGeometryVersion);
    out.write(upstream_hash);
    out.write(static_cast<std::uint64_t>(g.points.size()));
    for (const Vec3& p : g.points) out.write_span(std::span<const double>(p.data(), 3));
    out.write(static_cast<std::uint32_t>(g.hierarchy.level_count()));
    for (std::size_t l = 0; l < g.hierarchy.level_count(); ++l) {
      write_indices(out, g.hierarchy.levels[l]);
      write_indices(out, g.hierarchy.nearest_coarse[l]);
    }
    for (const auto& op : g.level_ops) write_operator(out, op);
    for (const auto& op : g.down_ops) write_operator(out, op);
    out.close();
  }
  std::filesystem::rename(tmp, path);
}

CloudGeometry load_geometry(const std::string& path,
                            std::uint64_t expected_upstream_hash) {
  if (!std::filesystem::exists(path)) throw CacheMiss("missing cache " + path);
  BinaryReader in(path);
  in.expect_magic("NPGE");
  if (in.read<std::uint32_t>() != kGeometryVersion)
    throw CacheMiss(path + ": geometry cache version changed");
  if (in.read<std::uint64_t>() != expected_upstream_hash)
    throw CacheMiss(path + ": stale geometry cache (upstream hash mismatch)");
  CloudGeometry g;
  const auto n = in.read<std::uint64_t>();
  const auto coords = in.read_vector<double>(3 * n);
  g.points.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    g.points[i] = Vec3(coords[3 * i], coords[3 * i + 1], coords[3 * i + 2]);
  const auto levels = in.read<std::uint32_t>();
  for (std::uint32_t l = 0; l < levels; ++l) {
    g.hierarchy.levels.push_back(read_indices(in));
    g.hierarchy.nearest_coarse.push_back(read_indices(in));
  }
  for (std::uint32_t l = 0; l < levels; ++l) g.level_ops.push_back(read_operator(in));
  for (std::uint32_t l = 0; l + 1 < levels; ++l) g.down_ops.push_back(read_operator(in));
  return g;
}

}  // namespace nptc
