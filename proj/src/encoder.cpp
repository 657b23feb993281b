#include "ragforge/encoder.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "ragforge/util.hpp"

namespace ragforge {

EncoderGrads zero_grads_like(const EncoderParams& params) {
    EncoderGrads g;
    g.embeddings = MatD(params.embeddings.rows(), params.embeddings.cols());
    g.projection = MatD(params.projection.rows(), params.projection.cols());
    g.bias.assign(params.bias.size(), 0.0);
    return g;
}

namespace {

void fill_uniform(std::span<double> out, uint64_t seed, std::string_view tag, double scale) {
    SplitMix64 rng(seed, tag);
    for (double& x : out) x = rng.next_uniform(scale);
}

// Mean embedding of the tokens in fixed input order; empty input gives the
// zero vector.
std::vector<double> mean_embedding(const EncoderParams& params,
                                   std::span<const uint32_t> token_ids) {
    const uint32_t v = params.vocab_size();
    std::vector<double> h(params.dim(), 0.0);
    if (token_ids.empty()) return h;
    for (uint32_t t : token_ids) {
        if (t >= v)
            throw std::out_of_range("encode: token id " + std::to_string(t) + " out of range [0, " +
                                    std::to_string(v) + ")");
        const double* row = params.embeddings.row(t);
        for (size_t i = 0; i < h.size(); ++i) h[i] += row[i];
    }
    const double inv = 1.0 / static_cast<double>(token_ids.size());
    for (double& x : h) x *= inv;
    return h;
}

}  // namespace

EncoderParams init_encoder(uint64_t seed, uint32_t vocab_size, uint32_t dim, double scale) {
    if (vocab_size < 2) throw std::invalid_argument("init_encoder: vocab_size must be >= 2");
    if (dim < 1) throw std::invalid_argument("init_encoder: dim must be >= 1");
    if (scale <= 0.0) throw std::invalid_argument("init_encoder: scale must be > 0");
    EncoderParams p;
    p.embeddings = MatD(vocab_size, dim);
    p.projection = MatD(dim, dim);
    p.bias.assign(dim, 0.0);
    fill_uniform(p.embeddings.data(), seed, "E", scale);
    fill_uniform(p.projection.data(), seed, "W", scale);
    fill_uniform(p.bias, seed, "b", scale);
    return p;
}

std::vector<double> encode(const EncoderParams& params, std::span<const uint32_t> token_ids) {
    const auto h = mean_embedding(params, token_ids);
    std::vector<double> out(params.dim());
    matvec(params.projection, h, out);
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i] + params.bias[i]);
    return out;
}

void encode_backward_accum(const EncoderParams& params, std::span<const uint32_t> token_ids,
                           std::span<const double> upstream, EncoderGrads& grads) {
    const size_t d = params.dim();
    if (upstream.size() != d) throw std::invalid_argument("encode_backward: upstream size mismatch");

    const auto h = mean_embedding(params, token_ids);
    std::vector<double> pre(d);
    matvec(params.projection, h, pre);
    // g_pre = upstream * (1 - tanh(pre)^2)
    std::vector<double> g_pre(d);
    for (size_t i = 0; i < d; ++i) {
        const double e = std::tanh(pre[i] + params.bias[i]);
        g_pre[i] = upstream[i] * (1.0 - e * e);
    }

    for (size_t i = 0; i < d; ++i) {
        grads.bias[i] += g_pre[i];
        double* wrow = grads.projection.row(i);
        for (size_t j = 0; j < d; ++j) wrow[j] += g_pre[i] * h[j];
    }

    if (token_ids.empty()) return;
    std::vector<double> g_h(d);
    matvec_t(params.projection, g_pre, g_h);
    const double inv = 1.0 / static_cast<double>(token_ids.size());
    for (uint32_t t : token_ids) {
        double* erow = grads.embeddings.row(t);
        for (size_t j = 0; j < d; ++j) erow[j] += g_h[j] * inv;
    }
}

EncoderGrads encode_backward(const EncoderParams& params, std::span<const uint32_t> token_ids,
                             std::span<const double> upstream) {
    EncoderGrads grads = zero_grads_like(params);
    encode_backward_accum(params, token_ids, upstream, grads);
    return grads;
}

uint64_t encoder_fingerprint(const EncoderParams& params) {
    uint64_t h = hash_doubles(params.embeddings.data());
    h = hash_doubles(params.projection.data(), h);
    return hash_doubles(params.bias, h);
}

}  // namespace ragforge
