#include "ragforge/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>

#include "ragforge/metrics.hpp"
#include "ragforge/util.hpp"

namespace ragforge {

std::string to_string(TrainMode mode) {
    return mode == TrainMode::frozen ? "frozen" : "end2end";
}

TrainMode train_mode_from_string(const std::string& s) {
    if (s == "frozen") return TrainMode::frozen;
    if (s == "end2end") return TrainMode::end2end;
    throw std::invalid_argument("unknown mode \"" + s + "\" (expected frozen or end2end)");
}

ModelParams init_model(uint64_t seed, const ModelDims& dims) {
    ModelParams params;
    params.encoders.question = init_encoder(seed, dims.vocab_size, dims.emb_dim, dims.init_scale);
    params.encoders.passage = params.encoders.question;  // shared init, towers diverge in training
    params.generator =
        init_generator(seed, dims.vocab_size, dims.gen_ctx_dim, dims.gen_hidden_dim, dims.init_scale);
    return params;
}

namespace {

void axpy(std::vector<double>& x, const std::vector<double>& g, double a) {
    for (size_t i = 0; i < x.size(); ++i) x[i] += a * g[i];
}

void apply_sgd(EncoderParams& p, const EncoderGrads& g, double lr) {
    axpy(p.embeddings.data(), g.embeddings.data(), -lr);
    axpy(p.projection.data(), g.projection.data(), -lr);
    axpy(p.bias, g.bias, -lr);
}

void apply_sgd(GeneratorParams& p, const GeneratorGrads& g, double lr) {
    axpy(p.token_embeddings.data(), g.token_embeddings.data(), -lr);
    axpy(p.hidden_map.data(), g.hidden_map.data(), -lr);
    axpy(p.hidden_bias, g.hidden_bias, -lr);
    axpy(p.output_map.data(), g.output_map.data(), -lr);
}

std::vector<std::span<const uint32_t>> gather_doc_tokens(const std::vector<Chunk>& chunks,
                                                         const std::vector<uint32_t>& chunk_ids) {
    std::vector<std::span<const uint32_t>> spans;
    spans.reserve(chunk_ids.size());
    for (uint32_t cid : chunk_ids) {
        if (cid >= chunks.size())
            throw std::out_of_range("retrieved chunk id " + std::to_string(cid) +
                                    " outside corpus");
        spans.emplace_back(chunks[cid].token_ids);
    }
    return spans;
}

double median(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const size_t n = xs.size();
    if (n == 0) return 0.0;
    return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

}  // namespace

StepRecord train_step(ModelParams& params, std::span<const QaExample* const> batch,
                      const IndexSnapshot& snapshot, const std::vector<Chunk>& chunks,
                      const TrainConfig& config) {
    if (batch.empty()) throw std::invalid_argument("train_step: empty batch");

    ModelGrads grads = zero_grads_like(params);
    const double weight = 1.0 / static_cast<double>(batch.size());

    StepRecord record;
    record.snapshot_generation_used = snapshot.generation;
    double loss_sum = 0.0;
    for (const QaExample* ex : batch) {
        const auto q_emb = encode(params.encoders.question, ex->question_token_ids);
        const auto hits = search(snapshot, q_emb, config.k, config.nprobe);
        const auto doc_tokens = gather_doc_tokens(chunks, hits.chunk_ids);
        const auto fwd = model_backward(params, ex->question_token_ids, doc_tokens, hits.chunk_ids,
                                        ex->answer_token_ids, weight, grads);
        loss_sum += fwd.loss;
        if (ex->gold_chunk_id) {
            const bool got = std::find(hits.chunk_ids.begin(), hits.chunk_ids.end(),
                                       *ex->gold_chunk_id) != hits.chunk_ids.end();
            record.gold_retrieved.push_back(got);
        }
        record.retrieved.push_back(hits.chunk_ids);
    }
    record.loss = loss_sum * weight;

    apply_sgd(params.encoders.question, grads.question, config.lr);
    apply_sgd(params.generator, grads.generator, config.lr);
    if (config.mode == TrainMode::end2end)
        apply_sgd(params.encoders.passage, grads.passage, config.lr);
    return record;
}

EvalReport evaluate(const ModelParams& params, const IndexSnapshot& snapshot,
                    const std::vector<QaExample>& eval_set, const std::vector<Chunk>& chunks,
                    uint32_t k, uint32_t nprobe, uint32_t max_decode_len) {
    if (eval_set.empty()) throw std::invalid_argument("evaluate: empty eval set");

    size_t exact = 0;
    size_t gold_hits = 0;
    size_t with_gold = 0;
    for (const auto& ex : eval_set) {
        const auto q_emb = encode(params.encoders.question, ex.question_token_ids);
        const auto hits = search(snapshot, q_emb, k, nprobe);
        const auto doc_tokens = gather_doc_tokens(chunks, hits.chunk_ids);

        MatD fresh(doc_tokens.size(), params.encoders.passage.dim());
        for (size_t z = 0; z < doc_tokens.size(); ++z) {
            const auto emb = encode(params.encoders.passage, doc_tokens[z]);
            std::copy(emb.begin(), emb.end(), fresh.row(z));
        }
        const auto post = doc_posterior(q_emb, fresh, hits.chunk_ids);

        // Decode against the highest-posterior document.
        size_t top = 0;
        for (size_t z = 1; z < post.probs.size(); ++z)
            if (post.probs[z] > post.probs[top]) top = z;
        const auto q_ctx = context_embedding(params.generator, ex.question_token_ids);
        const auto d_ctx = context_embedding(params.generator, doc_tokens[top]);
        const auto decoded = greedy_decode(params.generator, q_ctx, d_ctx, max_decode_len);
        if (decoded.size() == ex.answer_token_ids.size() &&
            std::equal(decoded.begin(), decoded.end(), ex.answer_token_ids.begin()))
            ++exact;

        if (ex.gold_chunk_id) {
            ++with_gold;
            if (std::find(hits.chunk_ids.begin(), hits.chunk_ids.end(), *ex.gold_chunk_id) !=
                hits.chunk_ids.end())
                ++gold_hits;
        }
    }

    EvalReport report;
    report.exact_match_percent = 100.0 * static_cast<double>(exact) / eval_set.size();
    report.n_examples = eval_set.size();
    if (with_gold > 0)
        report.retrieval_recall_at_k = static_cast<double>(gold_hits) / with_gold;
    report.snapshot_generation = snapshot.generation;
    report.k = k;
    report.nprobe = nprobe;
    return report;
}

TrainResult train(const TrainConfig& config, const ModelDims& dims,
                  const std::vector<Document>& docs, const std::vector<QaExample>& train_set,
                  const std::vector<QaExample>& eval_set, MetricsLog* metrics) {
    if (config.steps < 1) throw std::invalid_argument("train: steps must be >= 1");
    if (train_set.empty()) throw std::invalid_argument("train: empty training set");

    ChunkingConfig chunking;
    chunking.vocab_size = dims.vocab_size;
    chunking.prepend_title = dims.prepend_title;
    auto chunks = std::make_shared<const std::vector<Chunk>>(chunk_corpus(docs, chunking));
    if (chunks->empty()) throw std::invalid_argument("train: corpus produced no chunks");
    for (const auto* set : {&train_set, &eval_set}) {
        for (const auto& ex : *set) {
            if (ex.gold_chunk_id && *ex.gold_chunk_id >= chunks->size())
                throw std::invalid_argument("train: gold_chunk_id " +
                                            std::to_string(*ex.gold_chunk_id) +
                                            " outside chunked corpus");
        }
    }

    ModelParams params = init_model(config.seed, dims);

    // Generation 1: encode-then-index with the initial passage encoder,
    // synchronously, before the first step.
    SnapshotStore store;
    {
        std::vector<uint32_t> chunk_ids;
        chunk_ids.reserve(chunks->size());
        for (const auto& c : *chunks) chunk_ids.push_back(c.chunk_id);
        MatF embeddings =
            reencode_kb(params.encoders.passage, *chunks, config.refresh.num_workers);
        store.publish(std::make_shared<const IndexSnapshot>(
            rebuild(std::move(embeddings), std::move(chunk_ids), 0, config.refresh,
                    encoder_fingerprint(params.encoders.passage))));
    }

    Refresher refresher(config.refresh, chunks, store,
                        metrics ? [metrics](const RefreshEvent& ev) { metrics->record_refresh(ev); }
                                : std::function<void(const RefreshEvent&)>{});

    SplitMix64 batch_rng(config.seed, "batch");
    using clock = std::chrono::steady_clock;
    for (uint64_t step = 1; step <= config.steps; ++step) {
        std::vector<const QaExample*> batch(config.batch_size);
        for (auto& slot : batch) slot = &train_set[batch_rng.next_below(train_set.size())];

        const auto snapshot = store.latest();
        const auto t0 = clock::now();
        StepRecord record = train_step(params, batch, *snapshot, *chunks, config);
        record.step = step;
        record.timing_ms =
            std::chrono::duration<double, std::milli>(clock::now() - t0).count();
        refresher.on_step(step, params.encoders.passage);
        if (metrics) metrics->record_step(record);

        if (config.eval_every > 0 && step % config.eval_every == 0 && !eval_set.empty()) {
            auto report = evaluate(params, *store.latest(), eval_set, *chunks, config.k,
                                   config.nprobe, config.max_decode_len);
            report.mode = to_string(config.mode);
            if (metrics) metrics->record_eval(report);
        }
    }
    refresher.wait_idle();

    TrainResult result;
    result.final_snapshot = store.latest();
    if (!eval_set.empty()) {
        result.final_eval = evaluate(params, *result.final_snapshot, eval_set, *chunks, config.k,
                                     config.nprobe, config.max_decode_len);
        result.final_eval.mode = to_string(config.mode);
        if (metrics) metrics->record_eval(result.final_eval);
    } else {
        result.final_eval.mode = to_string(config.mode);
        result.final_eval.snapshot_generation = result.final_snapshot->generation;
    }
    result.refresh_counters = refresher.counters();
    result.params = std::move(params);
    return result;
}

ComparisonReport compare_modes(const TrainConfig& base, const ModelDims& dims,
                               const std::vector<Document>& docs,
                               const std::vector<QaExample>& train_set,
                               const std::vector<QaExample>& eval_set,
                               const std::vector<uint64_t>& seeds, MetricsLog* metrics) {
    if (seeds.empty()) throw std::invalid_argument("compare_modes: need at least one seed");

    ComparisonReport report;
    std::vector<double> frozen_em, end2end_em;
    for (TrainMode mode : {TrainMode::frozen, TrainMode::end2end}) {
        for (uint64_t seed : seeds) {
            TrainConfig config = base;
            config.mode = mode;
            config.seed = seed;
            const auto result = train(config, dims, docs, train_set, eval_set, metrics);
            ComparisonRow row;
            row.mode = mode;
            row.seed = seed;
            row.exact_match_percent = result.final_eval.exact_match_percent;
            row.retrieval_recall_at_k = result.final_eval.retrieval_recall_at_k;
            report.rows.push_back(row);
            (mode == TrainMode::frozen ? frozen_em : end2end_em)
                .push_back(row.exact_match_percent);
        }
    }
    report.median_frozen_em = median(frozen_em);
    report.median_end2end_em = median(end2end_em);
    report.em_gap = report.median_end2end_em - report.median_frozen_em;
    return report;
}

}  // namespace ragforge
