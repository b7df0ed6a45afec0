#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "json.hpp"

#include "adact/network.hpp"

namespace adact {

/// Structured-text model container: format tag, version, seed, the model
/// spec and every parameter as a flat array. Doubles are written in their
/// shortest round-trip form, so save/load is exact.
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  Model model;
  std::uint64_t seed = 0;
};

nlohmann::json spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const nlohmann::json& j);

nlohmann::json checkpoint_to_json(const Model& model, std::uint64_t seed);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const Model& model, std::uint64_t seed);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace adact
