#include "ragforge/refresher.hpp"

#include <chrono>
#include <stdexcept>

namespace ragforge {

void SnapshotStore::publish(std::shared_ptr<const IndexSnapshot> snapshot) {
    if (!snapshot) throw std::invalid_argument("SnapshotStore: null snapshot");
    std::lock_guard lock(mu_);
    if (latest_ && snapshot->generation <= latest_->generation)
        throw std::logic_error("SnapshotStore: generation must increase");
    latest_ = std::move(snapshot);
}

std::shared_ptr<const IndexSnapshot> SnapshotStore::latest() const {
    std::lock_guard lock(mu_);
    if (!latest_) throw std::runtime_error("SnapshotStore: no snapshot published yet");
    return latest_;
}

bool SnapshotStore::has_snapshot() const {
    std::lock_guard lock(mu_);
    return latest_ != nullptr;
}

MatF reencode_kb(const EncoderParams& passage_params, const std::vector<Chunk>& chunks,
                 uint32_t num_workers) {
    if (chunks.empty()) throw std::invalid_argument("reencode_kb: empty corpus");
    if (num_workers < 1) throw std::invalid_argument("reencode_kb: num_workers must be >= 1");
    const size_t n = chunks.size();
    const size_t d = passage_params.dim();
    MatF out(n, d);

    auto encode_rows = [&](size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i) {
            const auto emb = encode(passage_params, chunks[i].token_ids);
            float* row = out.row(i);
            for (size_t j = 0; j < d; ++j) row[j] = static_cast<float>(emb[j]);
        }
    };

    const size_t workers = std::min<size_t>(num_workers, n);
    if (workers == 1) {
        encode_rows(0, n);
        return out;
    }
    // Contiguous shards with preassigned rows: worker count cannot change
    // any row's value, only who computes it.
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w) {
        const size_t begin = n * w / workers;
        const size_t end = n * (w + 1) / workers;
        pool.emplace_back(encode_rows, begin, end);
    }
    for (auto& t : pool) t.join();
    return out;
}

IndexSnapshot rebuild(MatF embeddings, std::vector<uint32_t> chunk_ids, uint64_t prev_generation,
                      const RefreshConfig& config, uint64_t encoder_fingerprint) {
    if (config.index_kind == IndexKind::exact) {
        return build_exact(std::move(embeddings), std::move(chunk_ids), prev_generation + 1,
                           encoder_fingerprint);
    }
    return build_ivf(std::move(embeddings), std::move(chunk_ids), prev_generation + 1,
                     config.n_clusters, config.seed, encoder_fingerprint);
}

Refresher::Refresher(RefreshConfig config, std::shared_ptr<const std::vector<Chunk>> chunks,
                     SnapshotStore& store, std::function<void(const RefreshEvent&)> on_event)
    : config_(config), chunks_(std::move(chunks)), store_(store), on_event_(std::move(on_event)) {
    if (!chunks_ || chunks_->empty()) throw std::invalid_argument("Refresher: empty corpus");
    if (config_.refresh_every_n_steps < 1)
        throw std::invalid_argument("Refresher: refresh_every_n_steps must be >= 1");
    if (!store_.has_snapshot())
        throw std::runtime_error("Refresher: initial snapshot must be published first");
    counters_.published_generation = store_.latest()->generation;
    if (config_.mode == RefreshMode::async && config_.enabled) {
        worker_ = std::thread([this] { worker_loop(); });
    }
}

Refresher::~Refresher() {
    {
        std::lock_guard lock(mu_);
        shutdown_ = true;
    }
    cv_.notify_all();
    if (worker_.joinable()) worker_.join();
}

void Refresher::on_step(uint64_t step, const EncoderParams& passage_params) {
    if (!config_.enabled || step % config_.refresh_every_n_steps != 0) return;

    Job job{step, passage_params, encoder_fingerprint(passage_params)};
    bool skipped = false;
    uint64_t published = 0;
    {
        std::lock_guard lock(mu_);
        if (counters_.in_flight) {
            ++counters_.triggers_skipped;
            skipped = true;
            published = counters_.published_generation;
        } else {
            counters_.in_flight = true;
            counters_.captured_fingerprint = job.fingerprint;
            ++counters_.refreshes_started;
        }
    }
    if (skipped) {
        if (on_event_) {
            RefreshEvent ev;
            ev.step = step;
            ev.generation = published;
            ev.capture_fingerprint = job.fingerprint;
            ev.skipped = true;
            on_event_(ev);
        }
        return;
    }

    if (config_.mode == RefreshMode::sync) {
        run_refresh(std::move(job));
    } else {
        {
            std::lock_guard lock(mu_);
            pending_ = std::move(job);
        }
        cv_.notify_all();
    }
}

void Refresher::run_refresh(Job job) {
    using clock = std::chrono::steady_clock;
    const uint64_t prev_generation = counters().published_generation;

    const auto t0 = clock::now();
    MatF embeddings = reencode_kb(job.params, *chunks_, config_.num_workers);
    if (injected_delay_ms_ > 0)
        std::this_thread::sleep_for(std::chrono::milliseconds(injected_delay_ms_));
    const auto t1 = clock::now();

    std::vector<uint32_t> chunk_ids;
    chunk_ids.reserve(chunks_->size());
    for (const auto& c : *chunks_) chunk_ids.push_back(c.chunk_id);
    auto snapshot = std::make_shared<const IndexSnapshot>(
        rebuild(std::move(embeddings), std::move(chunk_ids), prev_generation, config_,
                job.fingerprint));
    const auto t2 = clock::now();

    store_.publish(snapshot);
    {
        std::lock_guard lock(mu_);
        counters_.published_generation = snapshot->generation;
        counters_.in_flight = false;
        ++counters_.refreshes_completed;
    }
    cv_.notify_all();

    if (on_event_) {
        RefreshEvent ev;
        ev.step = job.step;
        ev.generation = snapshot->generation;
        ev.capture_fingerprint = job.fingerprint;
        ev.reencode_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        ev.rebuild_ms = std::chrono::duration<double, std::milli>(t2 - t1).count();
        on_event_(ev);
    }
}

void Refresher::worker_loop() {
    for (;;) {
        Job job{0, {}, 0};
        {
            std::unique_lock lock(mu_);
            cv_.wait(lock, [this] { return shutdown_ || pending_.has_value(); });
            if (pending_) {
                job = std::move(*pending_);
                pending_.reset();
            } else if (shutdown_) {
                return;
            }
        }
        run_refresh(std::move(job));
    }
}

std::shared_ptr<const IndexSnapshot> Refresher::poll_latest() const {
    return store_.latest();
}

RefreshCounters Refresher::counters() const {
    std::lock_guard lock(mu_);
    return counters_;
}

void Refresher::wait_idle() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [this] { return !counters_.in_flight; });
}

}  // namespace ragforge
