#pragma once

#include <cstdint>
#include <string>

#include "layoutgen/model.hpp"
#include "layoutgen/schedule.hpp"

namespace layoutgen {

inline constexpr int kCheckpointSchemaVersion = 1;

struct Checkpoint {
  TrainedModel model;
  NoiseSchedule schedule;
  std::uint64_t training_seed = 0;
};

/// One JSON header line (schema version, layer shapes, schedule, seed,
/// trained relations) followed by named little-endian float32 arrays.
void save_checkpoint(const std::string& path, const TrainedModel& model,
                     const NoiseSchedule& schedule, std::uint64_t training_seed);

/// Validates every array name and shape against the header and against the
/// layout implied by the model config. Throws FormatError or IoError.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace layoutgen
