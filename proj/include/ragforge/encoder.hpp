#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ragforge/matrix.hpp"

namespace ragforge {

// Toy CLS-style encoder: mean-pool token embeddings, affine map, tanh.
// Outputs are deliberately not length-normalized; retrieval is inner
// product, not cosine.
struct EncoderParams {
    MatD embeddings;       // V x d
    MatD projection;       // d x d
    std::vector<double> bias;  // d

    uint32_t vocab_size() const { return static_cast<uint32_t>(embeddings.rows()); }
    uint32_t dim() const { return static_cast<uint32_t>(embeddings.cols()); }

    friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

struct DualEncoderParams {
    EncoderParams question;
    EncoderParams passage;

    friend bool operator==(const DualEncoderParams&, const DualEncoderParams&) = default;
};

struct EncoderGrads {
    MatD embeddings;
    MatD projection;
    std::vector<double> bias;
};

EncoderGrads zero_grads_like(const EncoderParams& params);

// Entries uniform in [-scale, scale] from splitmix64 streams seeded by
// (seed, parameter-name tag), so the same seed always gives the same
// parameters on any platform.
EncoderParams init_encoder(uint64_t seed, uint32_t vocab_size, uint32_t dim, double scale = 0.1);

// e = tanh(W h + b) with h the mean embedding of the tokens (h = 0 for an
// empty token list). Throws on an out-of-range token id.
std::vector<double> encode(const EncoderParams& params, std::span<const uint32_t> token_ids);

// Exact gradients of (upstream . encode(params, token_ids)) accumulated
// into grads; embedding rows of absent tokens are untouched.
void encode_backward_accum(const EncoderParams& params, std::span<const uint32_t> token_ids,
                           std::span<const double> upstream, EncoderGrads& grads);

EncoderGrads encode_backward(const EncoderParams& params, std::span<const uint32_t> token_ids,
                             std::span<const double> upstream);

// FNV-1a over the raw parameter bytes; identifies which encoder produced a
// set of KB embeddings.
uint64_t encoder_fingerprint(const EncoderParams& params);

}  // namespace ragforge
