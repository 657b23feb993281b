#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "ragforge/corpus.hpp"
#include "ragforge/encoder.hpp"
#include "ragforge/index.hpp"

namespace ragforge {

enum class RefreshMode : uint8_t { sync = 0, async = 1 };

struct RefreshConfig {
    uint32_t refresh_every_n_steps = 100;
    uint32_t num_workers = 1;
    RefreshMode mode = RefreshMode::sync;
    IndexKind index_kind = IndexKind::exact;
    uint32_t n_clusters = 16;  // ivf only
    uint64_t seed = 1;         // ivf only
    bool enabled = true;
};

struct RefreshEvent {
    uint64_t step = 0;
    uint64_t generation = 0;
    uint64_t capture_fingerprint = 0;
    double reencode_ms = 0.0;
    double rebuild_ms = 0.0;
    bool skipped = false;
};

struct RefreshCounters {
    uint64_t published_generation = 0;
    bool in_flight = false;
    uint64_t captured_fingerprint = 0;
    uint64_t refreshes_started = 0;
    uint64_t refreshes_completed = 0;
    uint64_t triggers_skipped = 0;
};

// Holder for the latest published snapshot. Publication replaces one
// shared_ptr under a mutex, so readers see either the old snapshot or the
// new one in full and never wait on an in-flight rebuild.
class SnapshotStore {
public:
    void publish(std::shared_ptr<const IndexSnapshot> snapshot);
    std::shared_ptr<const IndexSnapshot> latest() const;  // throws before first publish
    bool has_snapshot() const;

private:
    mutable std::mutex mu_;
    std::shared_ptr<const IndexSnapshot> latest_;
};

// Encode every chunk with the given passage encoder. Row i is the float32
// cast of encode(params, chunks[i].token_ids); workers own disjoint
// contiguous row shards, so the result is identical for any worker count.
MatF reencode_kb(const EncoderParams& passage_params, const std::vector<Chunk>& chunks,
                 uint32_t num_workers);

// Build the next-generation snapshot over re-encoded embeddings.
IndexSnapshot rebuild(MatF embeddings, std::vector<uint32_t> chunk_ids, uint64_t prev_generation,
                      const RefreshConfig& config, uint64_t encoder_fingerprint);

// Drives periodic KB refresh. Every N steps it deep-copies the passage
// encoder (capture-at-trigger), re-encodes the KB and publishes a new
// snapshot; triggers that arrive while a refresh is in flight are skipped,
// never queued. In async mode the work runs on a background thread and
// on_step returns immediately.
class Refresher {
public:
    Refresher(RefreshConfig config, std::shared_ptr<const std::vector<Chunk>> chunks,
              SnapshotStore& store, std::function<void(const RefreshEvent&)> on_event = {});
    ~Refresher();

    Refresher(const Refresher&) = delete;
    Refresher& operator=(const Refresher&) = delete;

    // Call once per training step with the post-update parameters.
    void on_step(uint64_t step, const EncoderParams& passage_params);

    // Freshest published snapshot; never blocks on an in-flight refresh.
    std::shared_ptr<const IndexSnapshot> poll_latest() const;

    RefreshCounters counters() const;

    // Blocks until no refresh is in flight.
    void wait_idle();

    // Test hook: stretch the refresh so triggers can overlap it.
    void set_injected_delay_ms(uint32_t ms) { injected_delay_ms_ = ms; }

private:
    struct Job {
        uint64_t step;
        EncoderParams params;  // private copy captured at trigger time
        uint64_t fingerprint;
    };

    void run_refresh(Job job);
    void worker_loop();

    RefreshConfig config_;
    std::shared_ptr<const std::vector<Chunk>> chunks_;
    SnapshotStore& store_;
    std::function<void(const RefreshEvent&)> on_event_;
    uint32_t injected_delay_ms_ = 0;

    mutable std::mutex mu_;
    std::condition_variable cv_;
    RefreshCounters counters_;
    std::optional<Job> pending_;
    bool shutdown_ = false;
    std::thread worker_;
};

}  // namespace ragforge
