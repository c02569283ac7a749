#pragma once

// Binary checkpoint: magic, format version, a JSON block with the model
// config and optimizer hyper-parameters, then the raw parameter and
// moment vectors. Doubles are stored bit-for-bit.

#include <filesystem>
#include <stdexcept>

#include "json.hpp"
#include "lengen/model.hpp"
#include "lengen/optim.hpp"

namespace lengen::ckpt {

inline constexpr std::uint32_t kFormatVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  nn::ModelConfig config;
  nn::Parameters params;
  nn::OptimState optim;
  nlohmann::json meta = nlohmann::json::object();
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace lengen::ckpt
