#pragma once

#include <cstdint>
#include <string>

#include "ragforge/model.hpp"
#include "ragforge/trainer.hpp"

namespace ragforge {

struct CheckpointMeta {
    ModelDims dims;
    uint64_t seed = 0;
    uint64_t step = 0;
    std::string mode = "end2end";
};

struct LoadedCheckpoint {
    ModelParams params;
    CheckpointMeta meta;
};

// Single file: a one-line JSON manifest (format version, dims, seed, step,
// mode, named tensor list with shapes) followed by the tensors as
// little-endian float32 in manifest order. Loading verifies the manifest
// against the payload byte length and every tensor shape; a mismatch
// names the offending tensor.
void save_checkpoint(const std::string& path, const ModelParams& params,
                     const CheckpointMeta& meta);

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace ragforge
