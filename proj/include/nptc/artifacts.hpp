#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nptc/eikonal.hpp"
#include "nptc/frames.hpp"
#include "nptc/narrowband.hpp"

namespace nptc {

// Stage files written by the CLI. Each starts with a 4-byte magic, a u32
// version and the list of upstream inputs (role + content hash) it was
// derived from; consumers compare those hashes with the files they are given.
struct Upstream {
  std::string role;
  std::uint64_t hash = 0;
};

/// Throws CacheMiss unless `upstream` records `role` with the current content
/// hash of `path`.
void require_upstream(const std::vector<Upstream>& upstream,
                      const std::string& role, const std::string& path);

struct BandArtifact {
  std::vector<Upstream> upstream;
  PointCloud cloud;  // normalized
  NarrowBand band;
};

struct DistanceArtifact {
  std::vector<Upstream> upstream;
  SeedSet seeds;
  GridScalarField grid;
  PointScalarField points;
};

struct FramesArtifact {
  std::vector<Upstream> upstream;
  std::uint32_t k = 16;
  NormalPolicy policy = NormalPolicy::LpcaCentroidOriented;
  FrameField frames;
};

void save_band(const BandArtifact& a, const std::string& path);
BandArtifact load_band(const std::string& path);

void save_distance(const DistanceArtifact& a, const std::string& path);
DistanceArtifact load_distance(const std::string& path);

void save_frames(const FramesArtifact& a, const std::string& path);
FramesArtifact load_frames(const std::string& path);

/// Text index list: first line "# nptc-indices <role> <hash>", then one index
/// per line.
void save_indices(const std::vector<std::uint32_t>& indices,
                  const Upstream& upstream, const std::string& path);
std::vector<std::uint32_t> load_indices(const std::string& path,
                                        Upstream* upstream = nullptr);

}  // namespace nptc
