#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ragforge {

struct Document {
    std::string doc_id;
    std::string title;
    std::string text;
};

// The retrieval atom: a <=max_words slice of one document.
struct Chunk {
    uint32_t chunk_id = 0;  // dense, corpus order
    std::string doc_id;
    std::string title;
    std::vector<uint32_t> token_ids;
    uint32_t word_count = 0;
};

struct QaExample {
    std::string question_text;
    std::string answer_text;
    std::vector<uint32_t> question_token_ids;
    std::vector<uint32_t> answer_token_ids;  // never empty
    std::optional<uint32_t> gold_chunk_id;   // synthetic data only
};

// Lowercase, split on runs of non-alphanumeric bytes, hash each word with
// 64-bit FNV-1a mod vocab_size. Pure; empty text gives an empty sequence.
std::vector<uint32_t> tokenize(std::string_view text, uint32_t vocab_size);

// Whitespace-split words of `text`, in order.
std::vector<std::string> split_words(std::string_view text);

struct ChunkingConfig {
    uint32_t max_words = 100;
    uint32_t vocab_size = 4096;
    bool prepend_title = false;  // when set, title tokens lead token_ids
};

// Consecutive non-overlapping windows of exactly max_words words, the last
// window holding the remainder. Empty documents yield no chunks. Chunk ids
// start at first_chunk_id.
std::vector<Chunk> chunk_document(const Document& doc, const ChunkingConfig& cfg,
                                  uint32_t first_chunk_id = 0);

// Chunk every document in corpus order with dense contiguous chunk ids.
std::vector<Chunk> chunk_corpus(const std::vector<Document>& docs, const ChunkingConfig& cfg);

// JSON Lines with string fields doc_id, title, text. Errors name the
// offending line or duplicate id.
std::vector<Document> load_corpus(const std::string& path);
void save_corpus(const std::vector<Document>& docs, const std::string& path);

// JSON Lines with question, answer, optional gold_chunk_id. Tokenizes both
// fields; an answer with no alphanumeric content is an error.
std::vector<QaExample> load_qa(const std::string& path, uint32_t vocab_size);
void save_qa(const std::vector<QaExample>& examples, const std::string& path);

struct SynthConfig {
    uint64_t seed = 1;
    uint32_t n_entities = 500;
    uint32_t n_relations = 5;
    uint32_t n_facts = 2000;
    uint32_t facts_per_passage = 4;
    uint32_t vocab_size = 4096;
};

struct SynthWorld {
    std::vector<Document> documents;
    std::vector<QaExample> examples;  // one per fact, corpus order
};

// Deterministic toy knowledge world. Each fact is a distinct (subject,
// relation) pair with its own answer word, rendered once as the sentence
// "entS relR objF." into exactly one passage of facts_per_passage facts.
// The question is "relR entS ?" and gold_chunk_id assumes chunking at
// 100 words. Throws if n_facts would force duplicate (subject, relation)
// pairs.
SynthWorld synth_world(const SynthConfig& cfg);

}  // namespace ragforge
