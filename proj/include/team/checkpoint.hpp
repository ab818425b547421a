#pragma once

#include <filesystem>

#include "team/decouple.hpp"
#include "team/network.hpp"

namespace team {

// Self-describing binary container, magic "TEAM", little-endian payload.
// Holds either a dense model or a decoupled global model; loading then
// saving reproduces the file byte for byte.

enum class ModelKind : std::uint8_t { Dense = 0, Decoupled = 1 };

struct LoadedModel {
    ModelKind kind = ModelKind::Dense;
    Network dense;      // valid when kind == Dense
    GlobalModel global; // valid when kind == Decoupled
};

void save_checkpoint(const std::filesystem::path& path, const Network& dense);
void save_checkpoint(const std::filesystem::path& path, const GlobalModel& global);
LoadedModel load_checkpoint(const std::filesystem::path& path);

} // namespace team
