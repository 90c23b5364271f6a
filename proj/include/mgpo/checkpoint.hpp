#pragma once
#include <array>
#include <cstdint>
#include <string>

#include "mgpo/lora.hpp"
#include "mgpo/optim.hpp"
#include "mgpo/rng.hpp"

namespace mgpo {

// Text container, doubles stored as raw IEEE-754 bit patterns so save/load
// round-trips bitwise. Version line guards the layout.

void save_model(const MlpModel& model, const std::string& path);
MlpModel load_model(const std::string& path);

struct TrainCheckpoint {
  long step = 0;
  MlpModel model;
  AdamWState adamw;
  ApnState apn;
  std::array<std::uint64_t, 4> rng_state{};
  bool rng_has_spare = false;
  double rng_spare = 0.0;
  std::uint64_t run_seed = 0;
};

void save_checkpoint(const TrainCheckpoint& ckpt, const std::string& path);
TrainCheckpoint load_checkpoint(const std::string& path);

}  // namespace mgpo
