#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "salgate/nn.hpp"
#include "salgate/train.hpp"

namespace salgate {

inline constexpr uint32_t kCheckpointFormatVersion = 1;

/// Single-file model archive:
///   "SALGATE\0" | u32 format_version | u64 header bytes | JSON header | f32 blobs (little endian)
/// The header holds kind, config echo, epoch, seed, steps, epoch_losses and a
/// tensor index {name: {shape, offset, count}}. Parameter tensors keep their
/// own names; Adam moments are stored as "optim.m/<name>" and "optim.v/<name>".
struct Checkpoint {
  std::string kind;  // detector | saliency | hybrid
  nlohmann::json config;
  TrainState state;  // adam moments are left empty; see restore_train_state
  std::map<std::string, nn::Tensor<float>> tensors;
};

Checkpoint make_checkpoint(const std::string& kind, const nlohmann::json& config,
                           const std::vector<nn::Param<float>*>& params, const TrainState& state);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies stored values into `params`; ConfigMismatch on a missing name or a shape mismatch.
void load_parameters(const Checkpoint& ckpt, const std::vector<nn::Param<float>*>& params);

/// TrainState with optimizer moments ordered like `params` (empty if none were stored).
TrainState restore_train_state(const Checkpoint& ckpt, const std::vector<nn::Param<float>*>& params);

}  // namespace salgate
