#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ragforge/matrix.hpp"

namespace ragforge {

enum class IndexKind : uint8_t { exact = 0, ivf = 1 };

// Immutable searchable structure over passage embeddings. Publication and
// staleness are tracked through `generation` and `encoder_fingerprint`;
// nothing mutates a snapshot after it is built.
struct IndexSnapshot {
    uint64_t generation = 0;
    IndexKind kind = IndexKind::exact;
    MatF embeddings;                  // N x d, float32
    std::vector<uint32_t> chunk_ids;  // N
    MatF centroids;                   // C x d, ivf only
    std::vector<std::vector<uint32_t>> inverted_lists;  // row indices, ivf only
    uint64_t encoder_fingerprint = 0;

    size_t num_rows() const { return embeddings.rows(); }
    size_t dim() const { return embeddings.cols(); }
    size_t num_clusters() const { return centroids.rows(); }
};

struct SearchResult {
    std::vector<uint32_t> chunk_ids;  // length min(k, candidates)
    std::vector<double> scores;       // inner products, non-increasing
};

IndexSnapshot build_exact(MatF embeddings, std::vector<uint32_t> chunk_ids, uint64_t generation,
                          uint64_t encoder_fingerprint = 0);

struct KMeansResult {
    MatF centroids;                    // C x d
    std::vector<uint32_t> assignments;  // N, cluster per row
};

// Lloyd's algorithm with Euclidean assignment. Initial centroids are
// n_clusters distinct rows sampled without replacement from `seed`; an
// emptied cluster is reseeded to the point farthest from its assigned
// centroid. Fixed iteration count, deterministic in seed.
KMeansResult kmeans(const MatF& embeddings, uint32_t n_clusters, uint32_t iters, uint64_t seed);

IndexSnapshot build_ivf(MatF embeddings, std::vector<uint32_t> chunk_ids, uint64_t generation,
                        uint32_t n_clusters, uint64_t seed, uint64_t encoder_fingerprint = 0,
                        uint32_t kmeans_iters = 10);

// Top-k by inner product. Exact snapshots scan every row; ivf snapshots
// rank clusters by centroid inner product and scan the top-nprobe lists.
// Ties break toward the lower chunk_id so runs reproduce bit-for-bit.
SearchResult search(const IndexSnapshot& snapshot, std::span<const double> query, uint32_t k,
                    uint32_t nprobe = 1);

// Binary format: magic "RGF1", format-version u32, generation u64, kind u8,
// N/d/C u64s, encoder_fingerprint u64, then little-endian float32 row-major
// matrices and u32 id/list payloads.
void save_snapshot(const IndexSnapshot& snapshot, const std::string& path);
IndexSnapshot load_snapshot(const std::string& path);

bool snapshots_equal(const IndexSnapshot& a, const IndexSnapshot& b);

}  // namespace ragforge
