#include "ragforge/config.hpp"

#include <cstdlib>
#include <filesystem>

namespace ragforge {

std::vector<std::string> validate_run_config(const RunConfig& config, bool require_eval) {
    std::vector<std::string> errors;
    auto require = [&](bool ok, const std::string& message) {
        if (!ok) errors.push_back(message);
    };

    require(!config.corpus_path.empty(), "corpus path is required");
    require(config.corpus_path.empty() || std::filesystem::exists(config.corpus_path),
            "corpus file does not exist: " + config.corpus_path);
    require(!config.train_path.empty(), "train qa path is required");
    require(config.train_path.empty() || std::filesystem::exists(config.train_path),
            "train qa file does not exist: " + config.train_path);
    if (require_eval)
        require(!config.eval_path.empty(), "eval qa path is required");
    require(config.eval_path.empty() || std::filesystem::exists(config.eval_path),
            "eval qa file does not exist: " + config.eval_path);
    require(!config.out_dir.empty(), "output directory is required");

    require(config.dims.vocab_size >= 2, "vocab-size must be >= 2");
    require(config.dims.emb_dim >= 1, "dim must be >= 1");
    require(config.dims.gen_ctx_dim >= 1, "gen-dim must be >= 1");
    require(config.dims.gen_hidden_dim >= 1, "hidden-dim must be >= 1");
    require(config.dims.init_scale > 0.0, "init-scale must be > 0");

    require(config.train.k >= 1, "k must be >= 1");
    require(config.train.steps >= 1, "steps must be >= 1");
    require(config.train.batch_size >= 1, "batch-size must be >= 1");
    require(config.train.lr > 0.0, "lr must be > 0");
    require(config.train.nprobe >= 1, "nprobe must be >= 1");
    require(config.train.max_decode_len >= 1, "max-decode-len must be >= 1");

    require(config.train.refresh.refresh_every_n_steps >= 1, "refresh-every must be >= 1");
    require(config.train.refresh.num_workers >= 1, "refresh-workers must be >= 1");
    if (config.train.refresh.index_kind == IndexKind::ivf)
        require(config.train.refresh.n_clusters >= 1, "clusters must be >= 1 for ivf");
    return errors;
}

uint32_t cap_workers_from_env(uint32_t requested) {
    const char* env = std::getenv("RAGFORGE_THREADS");
    if (!env) return requested;
    const long cap = std::strtol(env, nullptr, 10);
    if (cap < 1) return requested;
    return std::min<uint32_t>(requested, static_cast<uint32_t>(cap));
}

}  // namespace ragforge
