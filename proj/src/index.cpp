#include "ragforge/index.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "ragforge/util.hpp"

namespace ragforge {

namespace {

void validate_build_inputs(const MatF& embeddings, const std::vector<uint32_t>& chunk_ids) {
    if (embeddings.rows() == 0 || embeddings.cols() == 0)
        throw std::invalid_argument("index build: embeddings must be non-empty");
    if (chunk_ids.size() != embeddings.rows())
        throw std::invalid_argument("index build: chunk_ids length does not match embedding rows");
    for (float x : embeddings.data()) {
        if (!std::isfinite(x)) throw std::invalid_argument("index build: non-finite embedding entry");
    }
}

double sq_dist(const float* a, const double* b, size_t d) {
    double acc = 0.0;
    for (size_t i = 0; i < d; ++i) {
        const double diff = static_cast<double>(a[i]) - b[i];
        acc += diff * diff;
    }
    return acc;
}

// Collect the top-k (score desc, chunk_id asc) among candidate rows.
SearchResult top_k_rows(const IndexSnapshot& snap, std::span<const double> query,
                        std::span<const uint32_t> rows, uint32_t k) {
    struct Hit {
        double score;
        uint32_t chunk_id;
    };
    std::vector<Hit> hits;
    hits.reserve(rows.size());
    for (uint32_t r : rows) {
        hits.push_back({dot(query, snap.embeddings.row_span(r)), snap.chunk_ids[r]});
    }
    const size_t take = std::min<size_t>(k, hits.size());
    auto better = [](const Hit& a, const Hit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.chunk_id < b.chunk_id;
    };
    std::partial_sort(hits.begin(), hits.begin() + take, hits.end(), better);
    SearchResult result;
    result.chunk_ids.reserve(take);
    result.scores.reserve(take);
    for (size_t i = 0; i < take; ++i) {
        result.chunk_ids.push_back(hits[i].chunk_id);
        result.scores.push_back(hits[i].score);
    }
    return result;
}

}  // namespace

IndexSnapshot build_exact(MatF embeddings, std::vector<uint32_t> chunk_ids, uint64_t generation,
                          uint64_t encoder_fingerprint) {
    validate_build_inputs(embeddings, chunk_ids);
    IndexSnapshot snap;
    snap.generation = generation;
    snap.kind = IndexKind::exact;
    snap.embeddings = std::move(embeddings);
    snap.chunk_ids = std::move(chunk_ids);
    snap.encoder_fingerprint = encoder_fingerprint;
    return snap;
}

KMeansResult kmeans(const MatF& embeddings, uint32_t n_clusters, uint32_t iters, uint64_t seed) {
    const size_t n = embeddings.rows();
    const size_t d = embeddings.cols();
    if (n_clusters < 1 || n_clusters > n)
        throw std::invalid_argument("kmeans: need 1 <= n_clusters <= N");

    // Initial centroids: n_clusters distinct rows via partial Fisher-Yates.
    SplitMix64 rng(seed, "kmeans");
    std::vector<uint32_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = static_cast<uint32_t>(i);
    for (uint32_t i = 0; i < n_clusters; ++i) {
        const uint64_t j = i + rng.next_below(n - i);
        std::swap(order[i], order[j]);
    }
    MatD centroids(n_clusters, d);
    for (uint32_t c = 0; c < n_clusters; ++c) {
        const float* row = embeddings.row(order[c]);
        for (size_t j = 0; j < d; ++j) centroids(c, j) = row[j];
    }

    std::vector<uint32_t> assignments(n, 0);
    auto assign_all = [&] {
        for (size_t i = 0; i < n; ++i) {
            const float* row = embeddings.row(i);
            double best = std::numeric_limits<double>::infinity();
            uint32_t best_c = 0;
            for (uint32_t c = 0; c < n_clusters; ++c) {
                const double dist = sq_dist(row, centroids.row(c), d);
                if (dist < best) {
                    best = dist;
                    best_c = c;
                }
            }
            assignments[i] = best_c;
        }
    };

    for (uint32_t it = 0; it < iters; ++it) {
        assign_all();

        std::vector<size_t> counts(n_clusters, 0);
        MatD sums(n_clusters, d);
        for (size_t i = 0; i < n; ++i) {
            const float* row = embeddings.row(i);
            double* sum = sums.row(assignments[i]);
            for (size_t j = 0; j < d; ++j) sum[j] += row[j];
            ++counts[assignments[i]];
        }
        for (uint32_t c = 0; c < n_clusters; ++c) {
            if (counts[c] == 0) continue;
            const double inv = 1.0 / static_cast<double>(counts[c]);
            for (size_t j = 0; j < d; ++j) centroids(c, j) = sums(c, j) * inv;
        }

        // Reseed emptied clusters to the point farthest from its assigned
        // centroid, lowest cluster first, each point used at most once.
        std::vector<bool> taken(n, false);
        for (uint32_t c = 0; c < n_clusters; ++c) {
            if (counts[c] != 0) continue;
            double worst = -1.0;
            size_t pick = n;
            for (size_t i = 0; i < n; ++i) {
                if (taken[i]) continue;
                const double dist = sq_dist(embeddings.row(i), centroids.row(assignments[i]), d);
                if (dist > worst) {
                    worst = dist;
                    pick = i;
                }
            }
            if (pick == n) continue;  // fewer live points than clusters
            taken[pick] = true;
            const float* row = embeddings.row(pick);
            for (size_t j = 0; j < d; ++j) centroids(c, j) = row[j];
            assignments[pick] = c;
        }
    }
    assign_all();  // make assignments consistent with final centroids

    KMeansResult result;
    result.centroids = MatF(n_clusters, d);
    for (uint32_t c = 0; c < n_clusters; ++c)
        for (size_t j = 0; j < d; ++j)
            result.centroids(c, j) = static_cast<float>(centroids(c, j));
    result.assignments = std::move(assignments);
    return result;
}

IndexSnapshot build_ivf(MatF embeddings, std::vector<uint32_t> chunk_ids, uint64_t generation,
                        uint32_t n_clusters, uint64_t seed, uint64_t encoder_fingerprint,
                        uint32_t kmeans_iters) {
    validate_build_inputs(embeddings, chunk_ids);
    auto km = kmeans(embeddings, n_clusters, kmeans_iters, seed);

    IndexSnapshot snap;
    snap.generation = generation;
    snap.kind = IndexKind::ivf;
    snap.centroids = std::move(km.centroids);
    snap.inverted_lists.assign(n_clusters, {});
    for (size_t i = 0; i < km.assignments.size(); ++i)
        snap.inverted_lists[km.assignments[i]].push_back(static_cast<uint32_t>(i));
    snap.embeddings = std::move(embeddings);
    snap.chunk_ids = std::move(chunk_ids);
    snap.encoder_fingerprint = encoder_fingerprint;
    return snap;
}

SearchResult search(const IndexSnapshot& snap, std::span<const double> query, uint32_t k,
                    uint32_t nprobe) {
    if (k < 1) throw std::invalid_argument("search: k must be >= 1");
    if (query.size() != snap.dim()) throw std::invalid_argument("search: query dim mismatch");

    if (snap.kind == IndexKind::exact) {
        std::vector<uint32_t> all(snap.num_rows());
        for (size_t i = 0; i < all.size(); ++i) all[i] = static_cast<uint32_t>(i);
        return top_k_rows(snap, query, all, k);
    }

    const uint32_t n_clusters = static_cast<uint32_t>(snap.num_clusters());
    if (nprobe < 1 || nprobe > n_clusters)
        throw std::invalid_argument("search: nprobe out of range [1, C]");

    // Rank clusters by centroid inner product with the query.
    struct ClusterScore {
        double score;
        uint32_t cluster;
    };
    std::vector<ClusterScore> ranked(n_clusters);
    for (uint32_t c = 0; c < n_clusters; ++c)
        ranked[c] = {dot(query, snap.centroids.row_span(c)), c};
    std::partial_sort(ranked.begin(), ranked.begin() + nprobe, ranked.end(),
                      [](const ClusterScore& a, const ClusterScore& b) {
                          if (a.score != b.score) return a.score > b.score;
                          return a.cluster < b.cluster;
                      });

    std::vector<uint32_t> candidates;
    for (uint32_t p = 0; p < nprobe; ++p) {
        const auto& list = snap.inverted_lists[ranked[p].cluster];
        candidates.insert(candidates.end(), list.begin(), list.end());
    }
    return top_k_rows(snap, query, candidates, k);
}

namespace {

constexpr char kMagic[4] = {'R', 'G', 'F', '1'};
constexpr uint32_t kFormatVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
void write_vec(std::ofstream& out, const std::vector<T>& values) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(T)));
}

template <typename T>
void read_pod(std::ifstream& in, T& value, const std::string& path) {
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw std::runtime_error("truncated snapshot file: " + path);
}

template <typename T>
void read_vec(std::ifstream& in, std::vector<T>& values, size_t count, const std::string& path) {
    values.resize(count);
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(count * sizeof(T)));
    if (!in) throw std::runtime_error("truncated snapshot file: " + path);
}

}  // namespace

void save_snapshot(const IndexSnapshot& snap, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write snapshot file: " + path);
    out.write(kMagic, 4);
    write_pod(out, kFormatVersion);
    write_pod(out, snap.generation);
    write_pod(out, static_cast<uint8_t>(snap.kind));
    write_pod(out, static_cast<uint64_t>(snap.num_rows()));
    write_pod(out, static_cast<uint64_t>(snap.dim()));
    write_pod(out, static_cast<uint64_t>(snap.num_clusters()));
    write_pod(out, snap.encoder_fingerprint);
    write_vec(out, snap.embeddings.data());
    write_vec(out, snap.chunk_ids);
    if (snap.kind == IndexKind::ivf) {
        write_vec(out, snap.centroids.data());
        for (const auto& list : snap.inverted_lists)
            write_pod(out, static_cast<uint32_t>(list.size()));
        for (const auto& list : snap.inverted_lists) write_vec(out, list);
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

IndexSnapshot load_snapshot(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open snapshot file: " + path);

    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("bad snapshot magic in " + path);
    uint32_t version = 0;
    read_pod(in, version, path);
    if (version != kFormatVersion)
        throw std::runtime_error("unsupported snapshot format version " + std::to_string(version) +
                                 " in " + path);

    IndexSnapshot snap;
    uint8_t kind = 0;
    uint64_t n = 0, d = 0, c = 0;
    read_pod(in, snap.generation, path);
    read_pod(in, kind, path);
    read_pod(in, n, path);
    read_pod(in, d, path);
    read_pod(in, c, path);
    read_pod(in, snap.encoder_fingerprint, path);
    if (kind > 1) throw std::runtime_error("bad snapshot kind in " + path);
    snap.kind = static_cast<IndexKind>(kind);

    snap.embeddings = MatF(n, d);
    read_vec(in, snap.embeddings.data(), n * d, path);
    read_vec(in, snap.chunk_ids, n, path);
    if (snap.kind == IndexKind::ivf) {
        snap.centroids = MatF(c, d);
        read_vec(in, snap.centroids.data(), c * d, path);
        std::vector<uint32_t> lengths;
        read_vec(in, lengths, c, path);
        uint64_t total = 0;
        for (uint32_t len : lengths) total += len;
        if (total != n)
            throw std::runtime_error("snapshot inverted lists do not partition rows in " + path);
        snap.inverted_lists.resize(c);
        for (uint64_t i = 0; i < c; ++i) read_vec(in, snap.inverted_lists[i], lengths[i], path);
    }
    return snap;
}

bool snapshots_equal(const IndexSnapshot& a, const IndexSnapshot& b) {
    return a.generation == b.generation && a.kind == b.kind && a.embeddings == b.embeddings &&
           a.chunk_ids == b.chunk_ids && a.centroids == b.centroids &&
           a.inverted_lists == b.inverted_lists && a.encoder_fingerprint == b.encoder_fingerprint;
}

}  // namespace ragforge
