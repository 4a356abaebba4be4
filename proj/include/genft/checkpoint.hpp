#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "genft/adapters.hpp"

namespace genft {

/// Trained adapter state without the frozen base weights. Restored groups
/// carry zero bases until AdapterGroup::set_base() supplies W0.
struct Checkpoint {
  std::uint64_t seed = 0;
  std::vector<AdapterGroup> groups;
};

/// Layout: "GENFT1", u32 little-endian manifest byte length, the manifest
/// as JSON text, then one GFTM block per matrix in manifest order. Per
/// GenFT group: Us, Vs, then A, B (and bias) for each layer; per LoRA group:
/// lora_A, lora_B for each layer.
std::string checkpoint_manifest(const std::vector<AdapterGroup>& groups, std::uint64_t seed);
void write_checkpoint(std::ostream& out, const std::vector<AdapterGroup>& groups,
                      std::uint64_t seed);
void save_checkpoint(const std::string& path, const std::vector<AdapterGroup>& groups,
                     std::uint64_t seed);

Checkpoint read_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace genft
