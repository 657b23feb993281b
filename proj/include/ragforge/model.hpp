#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ragforge/encoder.hpp"
#include "ragforge/matrix.hpp"

namespace ragforge {

// Toy conditional generator: p(y | x, z) factorised per token. Each step
// conditions on a question context vector, a document context vector and
// the previous token, all read through the generator's own embedding
// table, so encoder gradients reach the loss only through p(z|x).
struct GeneratorParams {
    MatD token_embeddings;          // (V+2) x d_g; row V = BOS, row V+1 = EOS
    MatD hidden_map;                // h x 3*d_g
    std::vector<double> hidden_bias;  // h
    MatD output_map;                // (V+1) x h; output index V = EOS

    uint32_t vocab_size() const { return static_cast<uint32_t>(token_embeddings.rows()) - 2; }
    uint32_t ctx_dim() const { return static_cast<uint32_t>(token_embeddings.cols()); }
    uint32_t hidden_dim() const { return static_cast<uint32_t>(hidden_map.rows()); }
    uint32_t bos_row() const { return vocab_size(); }
    uint32_t eos_output_index() const { return vocab_size(); }

    friend bool operator==(const GeneratorParams&, const GeneratorParams&) = default;
};

struct GeneratorGrads {
    MatD token_embeddings;
    MatD hidden_map;
    std::vector<double> hidden_bias;
    MatD output_map;
};

GeneratorGrads zero_grads_like(const GeneratorParams& params);

struct ModelParams {
    DualEncoderParams encoders;
    GeneratorParams generator;

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

struct ModelGrads {
    EncoderGrads question;
    EncoderGrads passage;
    GeneratorGrads generator;
};

ModelGrads zero_grads_like(const ModelParams& params);

// p(z|x) over the retrieved top-k from raw inner-product scores.
struct DocPosterior {
    std::vector<uint32_t> chunk_ids;
    std::vector<double> scores;  // s_z = q(x) . d(z)
    std::vector<double> probs;   // softmax(scores), sums to 1
};

GeneratorParams init_generator(uint64_t seed, uint32_t vocab_size, uint32_t ctx_dim,
                               uint32_t hidden_dim, double scale = 0.1);

// Scores must come from embeddings recomputed with the current passage
// encoder; the index's stale vectors pick candidates only.
DocPosterior doc_posterior(std::span<const double> question_emb, const MatD& fresh_doc_embs,
                           std::span<const uint32_t> chunk_ids);

// Mean generator-embedding of a raw token sequence; empty gives zero.
std::vector<double> context_embedding(const GeneratorParams& params,
                                      std::span<const uint32_t> token_ids);

// Teacher-forced log p(y | contexts): sum over answer tokens plus EOS of
// log-softmax(U tanh(G [q_ctx; d_ctx; prev] + c)). Always <= 0.
double sequence_logprob(const GeneratorParams& params, std::span<const double> q_ctx,
                        std::span<const double> d_ctx, std::span<const uint32_t> answer_tokens);

// Accumulates weight * d(logprob)/d(generator params) into grads and
// weight * d(logprob)/d(context vectors) into g_qctx / g_dctx. The caller
// owns the chain rule from the context vectors back to the embedding rows.
void sequence_logprob_backward(const GeneratorParams& params, std::span<const double> q_ctx,
                               std::span<const double> d_ctx,
                               std::span<const uint32_t> answer_tokens, double weight,
                               GeneratorGrads& grads, std::span<double> g_qctx,
                               std::span<double> g_dctx);

// L = -log sum_z probs_z * exp(logprob_z), via logsumexp.
double marginal_nll(const DocPosterior& posterior, std::span<const double> doc_logprobs);

struct ModelForward {
    DocPosterior posterior;
    std::vector<double> doc_logprobs;  // per retrieved doc
    double loss = 0.0;
};

// Full pipeline for one example given a fixed retrieved candidate set:
// fresh passage encodings, posterior, per-doc sequence logprobs, loss.
ModelForward model_forward(const ModelParams& params, std::span<const uint32_t> question_tokens,
                           std::span<const std::span<const uint32_t>> doc_tokens,
                           std::span<const uint32_t> retrieved_chunk_ids,
                           std::span<const uint32_t> answer_tokens);

// Exact gradients of loss_weight * marginal NLL for every parameter group,
// accumulated into grads. The score gradient is p(z|x) - p(z|x,y); it
// propagates to both encoders through encode_backward.
ModelForward model_backward(const ModelParams& params, std::span<const uint32_t> question_tokens,
                            std::span<const std::span<const uint32_t>> doc_tokens,
                            std::span<const uint32_t> retrieved_chunk_ids,
                            std::span<const uint32_t> answer_tokens, double loss_weight,
                            ModelGrads& grads);

// Argmax decoding, ties to the lower token id, stops at EOS or max_len.
// EOS is not part of the output.
std::vector<uint32_t> greedy_decode(const GeneratorParams& params, std::span<const double> q_ctx,
                                    std::span<const double> d_ctx, uint32_t max_len);

double logsumexp(std::span<const double> xs);

}  // namespace ragforge
