#include "nptc/artifacts.hpp"

#include <fstream>
#include <sstream>

#include "nptc/binary_io.hpp"
#include "nptc/hash.hpp"

namespace nptc {

namespace {

constexpr std::uint32_t kVersion = 1;

void write_upstream(BinaryWriter& out, const std::vector<Upstream>& up) {
  out.write(static_cast<std::uint32_t>(up.size()));
  for (const auto& u : up) {
    out.write_string(u.role);
    out.write(u.hash);
  }
}

std::vector<Upstream> read_upstream(BinaryReader& in) {
  const auto n = in.read<std::uint32_t>();
  if (n > 64) throw ParseError(in.path() + ": implausible upstream count");
  std::vector<Upstream> up(n);
  for (auto& u : up) {
    u.role = in.read_string();
    u.hash = in.read<std::uint64_t>();
  }
  return up;
}

void read_header(BinaryReader& in, const char (&magic)[5]) {
  in.expect_magic(magic);
  const auto version = in.read<std::uint32_t>();
  if (version != kVersion)
    throw ParseError(in.path() + ": unsupported version " + std::to_string(version));
}

void write_vec3s(BinaryWriter& out, const std::vector<Vec3>& v) {
  out.write(static_cast<std::uint64_t>(v.size()));
  for (const Vec3& p : v) out.write_span(std::span<const double>(p.data(), 3));
}

std::vector<Vec3> read_vec3s(BinaryReader& in) {
  const auto n = in.read<std::uint64_t>();
  const auto raw = in.read_vector<double>(3 * n);
  std::vector<Vec3> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = Vec3(raw[3 * i], raw[3 * i + 1], raw[3 * i + 2]);
  return v;
}

template <typename T>
void write_vector(BinaryWriter& out, const std::vector<T>& v) {
  out.write(static_cast<std::uint64_t>(v.size()));
  out.write_span(std::span<const T>(v));
}

template <typename T>
std::vector<T> read_vector(BinaryReader& in) {
  const auto n = in.read<std::uint64_t>();
  if (n > (1ull << 32)) throw ParseError(in.path() + ": implausible array length");
  return in.read_vector<T>(n);
}

}  // namespace

void require_upstream(const std::vector<Upstream>& upstream,
                      const std::string& role, const std::string& path) {
  const auto current = hash_file(path);
  for (const auto& u : upstream)
    if (u.role == role) {
      if (u.hash != current)
        throw CacheMiss("stale input: " + path + " changed since the " + role +
                        " stage (hash " + hash_hex(current) + ", recorded " +
                        hash_hex(u.hash) + ")");
      return;
    }
  throw CacheMiss("artifact does not record a '" + role + "' input for " + path);
}

void save_band(const BandArtifact& a, const std::string& path) {
  BinaryWriter out(path);
  out.write_magic("NPNB");
  out.write(kVersion);
  write_upstream(out, a.upstream);
  write_vec3s(out, a.cloud.points);
  out.write(static_cast<std::uint8_t>(a.cloud.has_normals()));
  if (a.cloud.has_normals()) write_vec3s(out, *a.cloud.normals);
  out.write(a.cloud.source_transform.scale);
  out.write_span(std::span<const double>(a.cloud.source_transform.offset.data(), 3));
  out.write(static_cast<std::uint32_t>(a.band.grid.resolution));
  out.write(a.band.epsilon);
  write_vector(out, a.band.active);
  write_vector(out, a.band.dist_to_cloud);
  write_vector(out, a.band.contains_point);
  out.close();
}

BandArtifact load_band(const std::string& path) {
  BinaryReader in(path);
  read_header(in, "NPNB");
  BandArtifact a;
  a.upstream = read_upstream(in);
  a.cloud.points = read_vec3s(in);
  if (in.read<std::uint8_t>()) a.cloud.normals = read_vec3s(in);
  a.cloud.source_transform.scale = in.read<double>();
  const auto offset = in.read_vector<double>(3);
  a.cloud.source_transform.offset = Vec3(offset[0], offset[1], offset[2]);
  const auto m = in.read<std::uint32_t>();
  if (m == 0 || m > 2048) throw ParseError(path + ": implausible resolution");
  a.band.grid.resolution = static_cast<int>(m);
  a.band.epsilon = in.read<double>();
  a.band.active = read_vector<std::uint32_t>(in);
  a.band.dist_to_cloud = read_vector<double>(in);
  a.band.contains_point = read_vector<std::uint8_t>(in);
  for (const auto id : a.band.active)
    if (id >= a.band.grid.cell_count()) throw ParseError(path + ": voxel out of range");
  a.band.rebuild_slots();
  return a;
}

void save_distance(const DistanceArtifact& a, const std::string& path) {
  BinaryWriter out(path);
  out.write_magic("NPGS");
  out.write(kVersion);
  write_upstream(out, a.upstream);
  out.write(static_cast<std::uint32_t>(a.seeds.policy.kind));
  out.write(a.seeds.policy.point_index);
  out.write(static_cast<std::int32_t>(a.seeds.policy.axis));
  out.write(static_cast<std::uint8_t>(a.seeds.policy.high_side));
  out.write(static_cast<std::int64_t>(
      a.seeds.point_index ? static_cast<std::int64_t>(*a.seeds.point_index) : -1));
  write_vector(out, a.seeds.voxels);
  write_vector(out, a.grid.value);
  write_vector(out, a.grid.accepted);
  write_vector(out, a.grid.acceptance_order);
  write_vector(out, a.points.value);
  write_vector(out, a.points.out_of_band);
  out.close();
}

DistanceArtifact load_distance(const std::string& path) {
  BinaryReader in(path);
  read_header(in, "NPGS");
  DistanceArtifact a;
  a.upstream = read_upstream(in);
  a.seeds.policy.kind = static_cast<SeedPolicy::Kind>(in.read<std::uint32_t>());
  a.seeds.policy.point_index = in.read<std::uint32_t>();
  a.seeds.policy.axis = in.read<std::int32_t>();
  a.seeds.policy.high_side = in.read<std::uint8_t>() != 0;
  const auto seed_point = in.read<std::int64_t>();
  if (seed_point >= 0) a.seeds.point_index = static_cast<std::uint32_t>(seed_point);
  a.seeds.voxels = read_vector<std::int32_t>(in);
  a.grid.value = read_vector<double>(in);
  a.grid.accepted = read_vector<std::uint8_t>(in);
  a.grid.acceptance_order = read_vector<std::int32_t>(in);
  a.points.value = read_vector<double>(in);
  a.points.out_of_band = read_vector<std::uint8_t>(in);
  return a;
}

void save_frames(const FramesArtifact& a, const std::string& path) {
  BinaryWriter out(path);
  out.write_magic("NPFF");
  out.write(kVersion);
  write_upstream(out, a.upstream);
  out.write(a.k);
  out.write(static_cast<std::uint8_t>(a.policy));
  out.write(static_cast<std::int64_t>(
      a.frames.seed_point ? static_cast<std::int64_t>(*a.frames.seed_point) : -1));
  out.write(static_cast<std::uint64_t>(a.frames.size()));
  for (const auto& f : a.frames.frames) {
    out.write_span(std::span<const double>(f.u1.data(), 3));
    out.write_span(std::span<const double>(f.u2.data(), 3));
    out.write_span(std::span<const double>(f.n.data(), 3));
    out.write(static_cast<std::uint8_t>(f.singular));
  }
  out.close();
}

FramesArtifact load_frames(const std::string& path) {
  BinaryReader in(path);
  read_header(in, "NPFF");
  FramesArtifact a;
  a.upstream = read_upstream(in);
  a.k = in.read<std::uint32_t>();
  a.policy = static_cast<NormalPolicy>(in.read<std::uint8_t>());
  const auto seed = in.read<std::int64_t>();
  if (seed >= 0) a.frames.seed_point = static_cast<std::uint32_t>(seed);
  const auto n = in.read<std::uint64_t>();
  a.frames.frames.resize(n);
  for (auto& f : a.frames.frames) {
    const auto v = in.read_vector<double>(9);
    f.u1 = Vec3(v[0], v[1], v[2]);
    f.u2 = Vec3(v[3], v[4], v[5]);
    f.n = Vec3(v[6], v[7], v[8]);
    f.singular = in.read<std::uint8_t>() != 0;
    a.frames.singular_count += f.singular;
  }
  return a;
}

void save_indices(const std::vector<std::uint32_t>& indices,
                  const Upstream& upstream, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "# nptc-indices " << upstream.role << ' ' << hash_hex(upstream.hash) << '\n';
  for (const auto i : indices) out << i << '\n';
}

std::vector<std::uint32_t> load_indices(const std::string& path, Upstream* upstream) {
  std::ifstream in(path);
  if (!in) throw CacheMiss("cannot open " + path);
  std::string line;
  std::getline(in, line);
  std::istringstream header(line);
  std::string hash_mark, tag, role, hex;
  header >> hash_mark >> tag >> role >> hex;
  if (hash_mark != "#" || tag != "nptc-indices")
    throw ParseError(path + ":1: missing '# nptc-indices' header");
  if (upstream) {
    upstream->role = role;
    upstream->hash = std::stoull(hex, nullptr, 16);
  }
  std::vector<std::uint32_t> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(static_cast<std::uint32_t>(std::stoul(line)));
    } catch (const std::exception&) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": not an index");
    }
  }
  return out;
}

}  // namespace nptc
