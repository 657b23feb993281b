#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ragforge/corpus.hpp"
#include "ragforge/index.hpp"
#include "ragforge/model.hpp"
#include "ragforge/refresher.hpp"

namespace ragforge {

class MetricsLog;

enum class TrainMode : uint8_t { frozen = 0, end2end = 1 };

std::string to_string(TrainMode mode);
TrainMode train_mode_from_string(const std::string& s);

struct ModelDims {
    uint32_t vocab_size = 4096;
    uint32_t emb_dim = 32;       // dual-encoder output dim
    uint32_t gen_ctx_dim = 32;   // generator embedding dim
    uint32_t gen_hidden_dim = 64;
    double init_scale = 0.1;
    bool prepend_title = false;
};

// Both towers start from the same seed, so question/passage encodings of
// overlapping text are aligned at step 0. This is the toy stand-in for
// initializing the retriever from a pretrained dual encoder; with
// independent towers neither mode gets a usable retrieval signal to
// bootstrap from.
ModelParams init_model(uint64_t seed, const ModelDims& dims);

struct TrainConfig {
    TrainMode mode = TrainMode::end2end;
    uint32_t k = 5;
    uint32_t steps = 1000;
    uint32_t batch_size = 8;
    double lr = 0.1;
    RefreshConfig refresh;
    uint32_t nprobe = 4;
    uint64_t seed = 1;
    uint32_t eval_every = 0;  // 0 disables periodic eval; a final eval always runs
    uint32_t max_decode_len = 4;
};

struct StepRecord {
    uint64_t step = 0;
    double loss = 0.0;
    uint64_t snapshot_generation_used = 0;
    std::vector<std::vector<uint32_t>> retrieved;  // chunk ids per example
    std::vector<bool> gold_retrieved;              // per example; empty without gold ids
    double timing_ms = 0.0;
};

struct EvalReport {
    double exact_match_percent = 0.0;
    size_t n_examples = 0;
    std::optional<double> retrieval_recall_at_k;  // synthetic data only
    std::string mode;
    uint64_t snapshot_generation = 0;
    uint32_t k = 0;
    uint32_t nprobe = 0;
};

// One SGD step over a batch: retrieve candidates from the (possibly
// stale) snapshot, re-encode them with the current passage encoder, take
// exact gradients of the batch-mean marginal NLL and update in place.
// Frozen mode never touches the passage encoder.
StepRecord train_step(ModelParams& params, std::span<const QaExample* const> batch,
                      const IndexSnapshot& snapshot, const std::vector<Chunk>& chunks,
                      const TrainConfig& config);

EvalReport evaluate(const ModelParams& params, const IndexSnapshot& snapshot,
                    const std::vector<QaExample>& eval_set, const std::vector<Chunk>& chunks,
                    uint32_t k, uint32_t nprobe, uint32_t max_decode_len);

struct TrainResult {
    ModelParams params;
    EvalReport final_eval;
    RefreshCounters refresh_counters;
    std::shared_ptr<const IndexSnapshot> final_snapshot;
};

// Full run: chunk the corpus, build the generation-1 snapshot from the
// initial passage encoder, then alternate train_step / refresher triggers.
TrainResult train(const TrainConfig& config, const ModelDims& dims,
                  const std::vector<Document>& docs, const std::vector<QaExample>& train_set,
                  const std::vector<QaExample>& eval_set, MetricsLog* metrics = nullptr);

struct ComparisonRow {
    TrainMode mode;
    uint64_t seed;
    double exact_match_percent;
    std::optional<double> retrieval_recall_at_k;
};

struct ComparisonReport {
    std::vector<ComparisonRow> rows;  // frozen rows first, then end2end, by seed
    double median_frozen_em = 0.0;
    double median_end2end_em = 0.0;
    double em_gap = 0.0;  // end2end - frozen
};

// Frozen vs end-to-end over the same seeds and data.
ComparisonReport compare_modes(const TrainConfig& base, const ModelDims& dims,
                               const std::vector<Document>& docs,
                               const std::vector<QaExample>& train_set,
                               const std::vector<QaExample>& eval_set,
                               const std::vector<uint64_t>& seeds,
                               MetricsLog* metrics = nullptr);

}  // namespace ragforge
