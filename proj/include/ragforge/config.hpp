#pragma once

#include <string>
#include <vector>

#include "ragforge/trainer.hpp"

namespace ragforge {

// Everything a training run needs: data paths, model dims, train and
// refresh settings, output directory.
struct RunConfig {
    std::string corpus_path;
    std::string train_path;
    std::string eval_path;  // optional
    std::string out_dir;
    ModelDims dims;
    TrainConfig train;
};

// Returns every violation, not just the first; an empty result means the
// config is valid. Nothing is written to disk while any violation exists.
std::vector<std::string> validate_run_config(const RunConfig& config, bool require_eval = false);

// Cap from the RAGFORGE_THREADS environment variable, if set and positive.
uint32_t cap_workers_from_env(uint32_t requested);

}  // namespace ragforge
