#include "ragforge/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "ragforge/util.hpp"

namespace ragforge {

GeneratorGrads zero_grads_like(const GeneratorParams& params) {
    GeneratorGrads g;
    g.token_embeddings = MatD(params.token_embeddings.rows(), params.token_embeddings.cols());
    g.hidden_map = MatD(params.hidden_map.rows(), params.hidden_map.cols());
    g.hidden_bias.assign(params.hidden_bias.size(), 0.0);
    g.output_map = MatD(params.output_map.rows(), params.output_map.cols());
    return g;
}

ModelGrads zero_grads_like(const ModelParams& params) {
    ModelGrads g;
    g.question = zero_grads_like(params.encoders.question);
    g.passage = zero_grads_like(params.encoders.passage);
    g.generator = zero_grads_like(params.generator);
    return g;
}

double logsumexp(std::span<const double> xs) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : xs) m = std::max(m, x);
    if (!std::isfinite(m)) return m;  // all -inf
    double acc = 0.0;
    for (double x : xs) acc += std::exp(x - m);
    return m + std::log(acc);
}

GeneratorParams init_generator(uint64_t seed, uint32_t vocab_size, uint32_t ctx_dim,
                               uint32_t hidden_dim, double scale) {
    if (vocab_size < 2) throw std::invalid_argument("init_generator: vocab_size must be >= 2");
    if (ctx_dim < 1 || hidden_dim < 1)
        throw std::invalid_argument("init_generator: dims must be >= 1");
    GeneratorParams p;
    p.token_embeddings = MatD(vocab_size + 2, ctx_dim);
    p.hidden_map = MatD(hidden_dim, 3 * ctx_dim);
    p.hidden_bias.assign(hidden_dim, 0.0);
    p.output_map = MatD(vocab_size + 1, hidden_dim);
    auto fill = [&](std::span<double> out, std::string_view tag) {
        SplitMix64 rng(seed, tag);
        for (double& x : out) x = rng.next_uniform(scale);
    };
    fill(p.token_embeddings.data(), "A");
    fill(p.hidden_map.data(), "G");
    fill(p.hidden_bias, "c");
    fill(p.output_map.data(), "U");
    return p;
}

DocPosterior doc_posterior(std::span<const double> question_emb, const MatD& fresh_doc_embs,
                           std::span<const uint32_t> chunk_ids) {
    const size_t k = fresh_doc_embs.rows();
    if (k < 1) throw std::invalid_argument("doc_posterior: need k >= 1 documents");
    if (chunk_ids.size() != k)
        throw std::invalid_argument("doc_posterior: chunk_ids length mismatch");
    if (fresh_doc_embs.cols() != question_emb.size())
        throw std::invalid_argument("doc_posterior: embedding dim mismatch");
    for (double x : question_emb)
        if (!std::isfinite(x)) throw std::invalid_argument("doc_posterior: non-finite question emb");
    for (double x : fresh_doc_embs.data())
        if (!std::isfinite(x)) throw std::invalid_argument("doc_posterior: non-finite doc emb");

    DocPosterior post;
    post.chunk_ids.assign(chunk_ids.begin(), chunk_ids.end());
    post.scores.resize(k);
    for (size_t z = 0; z < k; ++z) post.scores[z] = dot(question_emb, fresh_doc_embs.row_span(z));

    // Softmax with max subtraction.
    double m = post.scores[0];
    for (double s : post.scores) m = std::max(m, s);
    post.probs.resize(k);
    double total = 0.0;
    for (size_t z = 0; z < k; ++z) {
        post.probs[z] = std::exp(post.scores[z] - m);
        total += post.probs[z];
    }
    for (double& p : post.probs) p /= total;
    return post;
}

std::vector<double> context_embedding(const GeneratorParams& params,
                                      std::span<const uint32_t> token_ids) {
    const uint32_t v = params.vocab_size();
    std::vector<double> ctx(params.ctx_dim(), 0.0);
    if (token_ids.empty()) return ctx;
    for (uint32_t t : token_ids) {
        if (t >= v) throw std::out_of_range("context_embedding: token id out of range");
        const double* row = params.token_embeddings.row(t);
        for (size_t i = 0; i < ctx.size(); ++i) ctx[i] += row[i];
    }
    const double inv = 1.0 / static_cast<double>(token_ids.size());
    for (double& x : ctx) x *= inv;
    return ctx;
}

namespace {

// One teacher-forced step: logits over V tokens + EOS.
struct StepForward {
    std::vector<double> z;       // [q_ctx; d_ctx; prev embedding], 3*d_g
    std::vector<double> hidden;  // tanh(G z + c), h
    std::vector<double> logits;  // U hidden, V+1
    double log_z = 0.0;          // logsumexp(logits)
};

StepForward generator_step(const GeneratorParams& params, std::span<const double> q_ctx,
                           std::span<const double> d_ctx, uint32_t prev_row) {
    const size_t dg = params.ctx_dim();
    const size_t h = params.hidden_dim();
    StepForward f;
    f.z.resize(3 * dg);
    std::copy(q_ctx.begin(), q_ctx.end(), f.z.begin());
    std::copy(d_ctx.begin(), d_ctx.end(), f.z.begin() + dg);
    const double* prev = params.token_embeddings.row(prev_row);
    std::copy(prev, prev + dg, f.z.begin() + 2 * dg);

    f.hidden.resize(h);
    matvec(params.hidden_map, f.z, f.hidden);
    for (size_t i = 0; i < h; ++i) f.hidden[i] = std::tanh(f.hidden[i] + params.hidden_bias[i]);

    f.logits.resize(params.output_map.rows());
    matvec(params.output_map, f.hidden, f.logits);
    f.log_z = logsumexp(f.logits);
    return f;
}

uint32_t check_answer_token(const GeneratorParams& params, uint32_t t) {
    if (t >= params.vocab_size())
        throw std::out_of_range("sequence_logprob: answer token " + std::to_string(t) +
                                " out of range");
    return t;
}

}  // namespace

double sequence_logprob(const GeneratorParams& params, std::span<const double> q_ctx,
                        std::span<const double> d_ctx, std::span<const uint32_t> answer_tokens) {
    if (q_ctx.size() != params.ctx_dim() || d_ctx.size() != params.ctx_dim())
        throw std::invalid_argument("sequence_logprob: context dim mismatch");
    double logprob = 0.0;
    uint32_t prev_row = params.bos_row();
    const size_t steps = answer_tokens.size() + 1;  // tokens then EOS
    for (size_t t = 0; t < steps; ++t) {
        const auto f = generator_step(params, q_ctx, d_ctx, prev_row);
        const uint32_t target = (t < answer_tokens.size())
                                    ? check_answer_token(params, answer_tokens[t])
                                    : params.eos_output_index();
        logprob += f.logits[target] - f.log_z;
        if (t < answer_tokens.size()) prev_row = answer_tokens[t];
    }
    return logprob;
}

void sequence_logprob_backward(const GeneratorParams& params, std::span<const double> q_ctx,
                               std::span<const double> d_ctx,
                               std::span<const uint32_t> answer_tokens, double weight,
                               GeneratorGrads& grads, std::span<double> g_qctx,
                               std::span<double> g_dctx) {
    const size_t dg = params.ctx_dim();
    const size_t h = params.hidden_dim();
    const size_t n_out = params.output_map.rows();

    uint32_t prev_row = params.bos_row();
    const size_t steps = answer_tokens.size() + 1;
    std::vector<double> dlogits(n_out), dhidden(h), dpre(h), dz(3 * dg);
    for (size_t t = 0; t < steps; ++t) {
        const auto f = generator_step(params, q_ctx, d_ctx, prev_row);
        const uint32_t target = (t < answer_tokens.size())
                                    ? check_answer_token(params, answer_tokens[t])
                                    : params.eos_output_index();

        // d(logprob)/d(logits) = onehot(target) - softmax(logits)
        for (size_t i = 0; i < n_out; ++i)
            dlogits[i] = -weight * std::exp(f.logits[i] - f.log_z);
        dlogits[target] += weight;

        for (size_t i = 0; i < n_out; ++i) {
            double* urow = grads.output_map.row(i);
            const double di = dlogits[i];
            for (size_t j = 0; j < h; ++j) urow[j] += di * f.hidden[j];
        }
        matvec_t(params.output_map, dlogits, dhidden);
        for (size_t i = 0; i < h; ++i) dpre[i] = dhidden[i] * (1.0 - f.hidden[i] * f.hidden[i]);

        for (size_t i = 0; i < h; ++i) {
            grads.hidden_bias[i] += dpre[i];
            double* grow = grads.hidden_map.row(i);
            const double di = dpre[i];
            for (size_t j = 0; j < 3 * dg; ++j) grow[j] += di * f.z[j];
        }
        matvec_t(params.hidden_map, dpre, dz);
        for (size_t j = 0; j < dg; ++j) g_qctx[j] += dz[j];
        for (size_t j = 0; j < dg; ++j) g_dctx[j] += dz[dg + j];
        double* arow = grads.token_embeddings.row(prev_row);
        for (size_t j = 0; j < dg; ++j) arow[j] += dz[2 * dg + j];

        if (t < answer_tokens.size()) prev_row = answer_tokens[t];
    }
}

double marginal_nll(const DocPosterior& posterior, std::span<const double> doc_logprobs) {
    const size_t k = posterior.probs.size();
    if (doc_logprobs.size() != k)
        throw std::invalid_argument("marginal_nll: posterior/logprob length mismatch");
    std::vector<double> terms(k);
    for (size_t z = 0; z < k; ++z) terms[z] = std::log(posterior.probs[z]) + doc_logprobs[z];
    return -logsumexp(terms);
}

namespace {

// Spread a context-vector gradient onto the mean-pooled embedding rows.
void scatter_context_grad(std::span<const uint32_t> token_ids, std::span<const double> g_ctx,
                          MatD& token_grads) {
    if (token_ids.empty()) return;
    const double inv = 1.0 / static_cast<double>(token_ids.size());
    for (uint32_t t : token_ids) {
        double* row = token_grads.row(t);
        for (size_t j = 0; j < g_ctx.size(); ++j) row[j] += g_ctx[j] * inv;
    }
}

}  // namespace

ModelForward model_forward(const ModelParams& params, std::span<const uint32_t> question_tokens,
                           std::span<const std::span<const uint32_t>> doc_tokens,
                           std::span<const uint32_t> retrieved_chunk_ids,
                           std::span<const uint32_t> answer_tokens) {
    const size_t k = doc_tokens.size();
    if (k < 1) throw std::invalid_argument("model_forward: need at least one retrieved doc");
    if (retrieved_chunk_ids.size() != k)
        throw std::invalid_argument("model_forward: chunk id count mismatch");

    const auto q_emb = encode(params.encoders.question, question_tokens);
    MatD fresh(k, params.encoders.passage.dim());
    for (size_t z = 0; z < k; ++z) {
        const auto emb = encode(params.encoders.passage, doc_tokens[z]);
        std::copy(emb.begin(), emb.end(), fresh.row(z));
    }

    ModelForward out;
    out.posterior = doc_posterior(q_emb, fresh, retrieved_chunk_ids);

    const auto q_ctx = context_embedding(params.generator, question_tokens);
    out.doc_logprobs.resize(k);
    for (size_t z = 0; z < k; ++z) {
        const auto d_ctx = context_embedding(params.generator, doc_tokens[z]);
        out.doc_logprobs[z] = sequence_logprob(params.generator, q_ctx, d_ctx, answer_tokens);
    }
    out.loss = marginal_nll(out.posterior, out.doc_logprobs);
    return out;
}

ModelForward model_backward(const ModelParams& params, std::span<const uint32_t> question_tokens,
                            std::span<const std::span<const uint32_t>> doc_tokens,
                            std::span<const uint32_t> retrieved_chunk_ids,
                            std::span<const uint32_t> answer_tokens, double loss_weight,
                            ModelGrads& grads) {
    const size_t k = doc_tokens.size();
    if (k < 1) throw std::invalid_argument("model_backward: need at least one retrieved doc");
    if (retrieved_chunk_ids.size() != k)
        throw std::invalid_argument("model_backward: chunk id count mismatch");
    const size_t d = params.encoders.passage.dim();
    const size_t dg = params.generator.ctx_dim();

    const auto q_emb = encode(params.encoders.question, question_tokens);
    MatD fresh(k, d);
    for (size_t z = 0; z < k; ++z) {
        const auto emb = encode(params.encoders.passage, doc_tokens[z]);
        std::copy(emb.begin(), emb.end(), fresh.row(z));
    }

    ModelForward out;
    out.posterior = doc_posterior(q_emb, fresh, retrieved_chunk_ids);
    const auto q_ctx = context_embedding(params.generator, question_tokens);
    std::vector<std::vector<double>> d_ctxs(k);
    out.doc_logprobs.resize(k);
    for (size_t z = 0; z < k; ++z) {
        d_ctxs[z] = context_embedding(params.generator, doc_tokens[z]);
        out.doc_logprobs[z] = sequence_logprob(params.generator, q_ctx, d_ctxs[z], answer_tokens);
    }
    out.loss = marginal_nll(out.posterior, out.doc_logprobs);

    // w_z = p(z|x,y), the answer-conditioned posterior.
    std::vector<double> joint(k);
    for (size_t z = 0; z < k; ++z)
        joint[z] = std::log(out.posterior.probs[z]) + out.doc_logprobs[z];
    const double joint_lse = logsumexp(joint);
    std::vector<double> w(k);
    for (size_t z = 0; z < k; ++z) w[z] = std::exp(joint[z] - joint_lse);

    // dL/d(logprob_z) = -w_z; dL/d(score_z) = p(z|x) - p(z|x,y).
    std::vector<double> g_qctx(dg, 0.0);
    std::vector<double> g_dctx(dg);
    for (size_t z = 0; z < k; ++z) {
        std::fill(g_dctx.begin(), g_dctx.end(), 0.0);
        sequence_logprob_backward(params.generator, q_ctx, d_ctxs[z], answer_tokens,
                                  -loss_weight * w[z], grads.generator, g_qctx, g_dctx);
        scatter_context_grad(doc_tokens[z], g_dctx, grads.generator.token_embeddings);
    }
    scatter_context_grad(question_tokens, g_qctx, grads.generator.token_embeddings);

    std::vector<double> g_q_emb(d, 0.0);
    std::vector<double> g_d_emb(d);
    for (size_t z = 0; z < k; ++z) {
        const double g_score = loss_weight * (out.posterior.probs[z] - w[z]);
        const double* doc_row = fresh.row(z);
        for (size_t j = 0; j < d; ++j) g_q_emb[j] += g_score * doc_row[j];
        for (size_t j = 0; j < d; ++j) g_d_emb[j] = g_score * q_emb[j];
        encode_backward_accum(params.encoders.passage, doc_tokens[z], g_d_emb, grads.passage);
    }
    encode_backward_accum(params.encoders.question, question_tokens, g_q_emb, grads.question);
    return out;
}

std::vector<uint32_t> greedy_decode(const GeneratorParams& params, std::span<const double> q_ctx,
                                    std::span<const double> d_ctx, uint32_t max_len) {
    if (max_len < 1) throw std::invalid_argument("greedy_decode: max_len must be >= 1");
    std::vector<uint32_t> out;
    uint32_t prev_row = params.bos_row();
    for (uint32_t t = 0; t < max_len; ++t) {
        const auto f = generator_step(params, q_ctx, d_ctx, prev_row);
        uint32_t best = 0;
        for (uint32_t i = 1; i < f.logits.size(); ++i) {
            if (f.logits[i] > f.logits[best]) best = i;  // ties keep the lower id
        }
        if (best == params.eos_output_index()) break;
        out.push_back(best);
        prev_row = best;
    }
    return out;
}

}  // namespace ragforge
