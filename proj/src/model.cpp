#include "nptc/model.hpp"

#include "nptc/binary_io.hpp"

namespace nptc {

namespace {
constexpr std::uint32_t kCheckpointVersion = 1;
}

void NetworkConfig::validate() const {
  if (widths.empty()) throw ConfigError("network needs at least one level");
  if (residual_blocks.size() != widths.size())
    throw ConfigError("residual_blocks must have one entry per level");
  if (taps_per_axis < 1 || taps_per_axis % 2 == 0)
    throw ConfigError("taps_per_axis must be a positive odd integer");
  if (num_classes < 2) throw ConfigError("need at least two classes");
  if (input_channels < 1 || head_width < 1)
    throw ConfigError("channel counts must be positive");
  for (std::size_t l = 0; l < widths.size(); ++l) {
    if (widths[l] < 1) throw ConfigError("widths must be positive");
    if (residual_blocks[l] < 0) throw ConfigError("negative residual block count");
    if (residual_blocks[l] > 0 && widths[l] % 2 != 0)
      throw ConfigError("level " + std::to_string(l) + " width " +
                        std::to_string(widths[l]) +
                        " must be even to host residual blocks");
  }
}

Tensor2<double> coordinate_features(const std::vector<Vec3>& points) {
  Tensor2<double> f(static_cast<Index>(points.size()), 3);
  for (std::size_t i = 0; i < points.size(); ++i)
    f.row(static_cast<Index>(i)) = (2.0 * (points[i] - Vec3::Constant(0.5))).transpose();
  return f;
}

void save_checkpoint(const NptcNet<float>& model, const std::string& config_json,
                     const std::string& path) {
  BinaryWriter out(path);
  out.write_magic("NPCK");
  out.write(kCheckpointVersion);
  out.write_string(config_json);
  const auto& entries = model.parameters().entries;
  out.write(static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    out.write_string(e.name);
    out.write(static_cast<std::uint32_t>(e.value.rows()));
    out.write(static_cast<std::uint32_t>(e.value.cols()));
    out.write_span(std::span<const float>(e.value.data(),
                                          static_cast<std::size_t>(e.value.size())));
  }
  out.close();
}

Checkpoint read_checkpoint(const std::string& path) {
  BinaryReader in(path);
  in.expect_magic("NPCK");
  if (in.read<std::uint32_t>() != kCheckpointVersion)
    throw ParseError(path + ": unsupported checkpoint version");
  Checkpoint ck;
  ck.config_json = in.read_string();
  const auto count = in.read<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = in.read_string();
    const auto rows = in.read<std::uint32_t>();
    const auto cols = in.read<std::uint32_t>();
    const auto data = in.read_vector<float>(static_cast<std::size_t>(rows) * cols);
    Tensor2<float> t = Eigen::Map<const Tensor2<float>>(data.data(), rows, cols);
    ck.tensors.emplace_back(std::move(name), std::move(t));
  }
  return ck;
}

void load_parameters(NptcNet<float>& model, const Checkpoint& checkpoint) {
  auto& entries = model.parameters().entries;
  if (entries.size() != checkpoint.tensors.size())
    throw ShapeError("checkpoint has " + std::to_string(checkpoint.tensors.size()) +
                     " tensors, model has " + std::to_string(entries.size()));
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& [name, value] = checkpoint.tensors[i];
    if (name != entries[i].name || value.rows() != entries[i].value.rows() ||
        value.cols() != entries[i].value.cols())
      throw ShapeError("checkpoint tensor '" + name + "' does not match '" +
                       entries[i].name + "'");
    entries[i].value = value;
  }
}

}  // namespace nptc
