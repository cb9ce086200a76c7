#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtle/model.hpp"
#include "mtle/trainer.hpp"

namespace mtle {

struct RngStateBundle {
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> words;
};

struct Checkpoint {
  Model model;
  TrainConfig config;
  RngStateBundle rng;
};

// Versioned binary container with a CRC32 trailer. Doubles are stored as raw
// IEEE-754 bits, so a round trip reproduces bit-identical predictions.
std::string serialize_checkpoint(const Model& model, const TrainConfig& config,
                                 const RngStateBundle& rng = {});
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const Model& model, const TrainConfig& config, const std::string& path,
                     const RngStateBundle& rng = {});
Checkpoint load_checkpoint(const std::string& path);

std::uint32_t crc32(const void* data, std::size_t len);

}  // namespace mtle
