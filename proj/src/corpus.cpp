#include "ragforge/corpus.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "ragforge/util.hpp"

namespace ragforge {

using nlohmann::json;

std::vector<uint32_t> tokenize(std::string_view text, uint32_t vocab_size) {
    if (vocab_size < 2) throw std::invalid_argument("tokenize: vocab_size must be >= 2");
    std::vector<uint32_t> ids;
    std::string word;
    auto flush = [&] {
        if (!word.empty()) {
            ids.push_back(static_cast<uint32_t>(fnv1a64(word) % vocab_size));
            word.clear();
        }
    };
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            word.push_back(static_cast<char>(std::tolower(c)));
        } else {
            flush();
        }
    }
    flush();
    return ids;
}

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    std::string word;
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            if (!word.empty()) {
                words.push_back(word);
                word.clear();
            }
        } else {
            word.push_back(static_cast<char>(c));
        }
    }
    if (!word.empty()) words.push_back(word);
    return words;
}

std::vector<Chunk> chunk_document(const Document& doc, const ChunkingConfig& cfg,
                                  uint32_t first_chunk_id) {
    if (cfg.max_words < 1) throw std::invalid_argument("chunk_document: max_words must be >= 1");
    std::vector<Chunk> chunks;
    const auto words = split_words(doc.text);
    const auto title_tokens =
        cfg.prepend_title ? tokenize(doc.title, cfg.vocab_size) : std::vector<uint32_t>{};
    for (size_t start = 0; start < words.size(); start += cfg.max_words) {
        const size_t end = std::min(words.size(), start + cfg.max_words);
        std::string text;
        for (size_t i = start; i < end; ++i) {
            if (i > start) text.push_back(' ');
            text += words[i];
        }
        Chunk chunk;
        chunk.chunk_id = first_chunk_id + static_cast<uint32_t>(chunks.size());
        chunk.doc_id = doc.doc_id;
        chunk.title = doc.title;
        chunk.word_count = static_cast<uint32_t>(end - start);
        chunk.token_ids = title_tokens;
        auto body = tokenize(text, cfg.vocab_size);
        chunk.token_ids.insert(chunk.token_ids.end(), body.begin(), body.end());
        chunks.push_back(std::move(chunk));
    }
    return chunks;
}

std::vector<Chunk> chunk_corpus(const std::vector<Document>& docs, const ChunkingConfig& cfg) {
    std::vector<Chunk> all;
    for (const auto& doc : docs) {
        auto chunks = chunk_document(doc, cfg, static_cast<uint32_t>(all.size()));
        for (auto& c : chunks) all.push_back(std::move(c));
    }
    return all;
}

namespace {

json parse_line(const std::string& line, const std::string& path, size_t line_no) {
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": malformed JSON line");
    }
    return obj;
}

std::string require_string(const json& obj, const char* field, const std::string& path,
                           size_t line_no) {
    if (!obj.contains(field) || !obj[field].is_string()) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": missing string field \"" +
                                 field + "\"");
    }
    return obj[field].get<std::string>();
}

}  // namespace

std::vector<Document> load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open corpus file: " + path);
    std::vector<Document> docs;
    std::unordered_set<std::string> seen_ids;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json obj = parse_line(line, path, line_no);
        Document doc;
        doc.doc_id = require_string(obj, "doc_id", path, line_no);
        doc.title = require_string(obj, "title", path, line_no);
        doc.text = require_string(obj, "text", path, line_no);
        if (!seen_ids.insert(doc.doc_id).second) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": duplicate doc_id \"" +
                                     doc.doc_id + "\"");
        }
        docs.push_back(std::move(doc));
    }
    return docs;
}

void save_corpus(const std::vector<Document>& docs, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write corpus file: " + path);
    for (const auto& doc : docs) {
        json obj = {{"doc_id", doc.doc_id}, {"title", doc.title}, {"text", doc.text}};
        out << obj.dump() << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<QaExample> load_qa(const std::string& path, uint32_t vocab_size) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open qa file: " + path);
    std::vector<QaExample> examples;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json obj = parse_line(line, path, line_no);
        QaExample ex;
        ex.question_text = require_string(obj, "question", path, line_no);
        ex.answer_text = require_string(obj, "answer", path, line_no);
        ex.question_token_ids = tokenize(ex.question_text, vocab_size);
        ex.answer_token_ids = tokenize(ex.answer_text, vocab_size);
        if (ex.answer_token_ids.empty()) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": answer has no tokens");
        }
        if (obj.contains("gold_chunk_id")) {
            if (!obj["gold_chunk_id"].is_number_unsigned()) {
                throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                         ": gold_chunk_id must be a non-negative integer");
            }
            ex.gold_chunk_id = obj["gold_chunk_id"].get<uint32_t>();
        }
        examples.push_back(std::move(ex));
    }
    return examples;
}

void save_qa(const std::vector<QaExample>& examples, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write qa file: " + path);
    for (const auto& ex : examples) {
        json obj = {{"question", ex.question_text}, {"answer", ex.answer_text}};
        if (ex.gold_chunk_id) obj["gold_chunk_id"] = *ex.gold_chunk_id;
        out << obj.dump() << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

SynthWorld synth_world(const SynthConfig& cfg) {
    if (cfg.n_entities < 2) throw std::invalid_argument("synth_world: n_entities must be >= 2");
    if (cfg.n_relations < 1) throw std::invalid_argument("synth_world: n_relations must be >= 1");
    if (cfg.facts_per_passage < 1)
        throw std::invalid_argument("synth_world: facts_per_passage must be >= 1");
    if (cfg.n_facts < 1) throw std::invalid_argument("synth_world: n_facts must be >= 1");
    const uint64_t n_pairs = uint64_t(cfg.n_entities) * cfg.n_relations;
    if (cfg.n_facts > n_pairs) {
        throw std::invalid_argument(
            "synth_world: n_facts exceeds distinct (entity, relation) pairs; "
            "duplicate facts would be forced");
    }

    // Pick n_facts distinct (subject, relation) pairs by partial
    // Fisher-Yates over the pair grid.
    SplitMix64 rng(cfg.seed, "synth_world");
    std::vector<uint64_t> pair_ids(n_pairs);
    for (uint64_t i = 0; i < n_pairs; ++i) pair_ids[i] = i;
    for (uint32_t i = 0; i < cfg.n_facts; ++i) {
        const uint64_t j = i + rng.next_below(n_pairs - i);
        std::swap(pair_ids[i], pair_ids[j]);
    }

    struct Fact {
        uint32_t subject, relation, object;
    };
    std::vector<Fact> facts(cfg.n_facts);
    for (uint32_t f = 0; f < cfg.n_facts; ++f) {
        facts[f].subject = static_cast<uint32_t>(pair_ids[f] / cfg.n_relations);
        facts[f].relation = static_cast<uint32_t>(pair_ids[f] % cfg.n_relations);
        facts[f].object = f;  // one distinct answer word per fact
    }

    auto ent = [](uint32_t i) { return "ent" + std::to_string(i); };
    auto rel = [](uint32_t i) { return "rel" + std::to_string(i); };
    auto obj = [](uint32_t i) { return "obj" + std::to_string(i); };

    SynthWorld world;
    const uint32_t n_passages = (cfg.n_facts + cfg.facts_per_passage - 1) / cfg.facts_per_passage;
    world.documents.reserve(n_passages);
    world.examples.reserve(cfg.n_facts);

    // gold_chunk_id assumes the standard 100-word chunking; every sentence
    // is exactly 3 whitespace words ("entS relR objF.").
    constexpr uint32_t kChunkWords = 100;
    uint32_t next_chunk_id = 0;
    for (uint32_t p = 0; p < n_passages; ++p) {
        const uint32_t begin = p * cfg.facts_per_passage;
        const uint32_t end = std::min(cfg.n_facts, begin + cfg.facts_per_passage);
        std::string text;
        for (uint32_t f = begin; f < end; ++f) {
            if (f > begin) text.push_back(' ');
            text += ent(facts[f].subject) + " " + rel(facts[f].relation) + " " +
                    obj(facts[f].object) + ".";
        }
        Document doc;
        doc.doc_id = "doc" + std::to_string(p);
        doc.title = "t" + std::to_string(p);
        doc.text = std::move(text);

        const uint32_t doc_words = (end - begin) * 3;
        const uint32_t doc_chunks = (doc_words + kChunkWords - 1) / kChunkWords;
        for (uint32_t f = begin; f < end; ++f) {
            const uint32_t answer_word_offset = (f - begin) * 3 + 2;
            QaExample ex;
            ex.question_text = rel(facts[f].relation) + " " + ent(facts[f].subject) + " ?";
            ex.answer_text = obj(facts[f].object);
            ex.question_token_ids = tokenize(ex.question_text, cfg.vocab_size);
            ex.answer_token_ids = tokenize(ex.answer_text, cfg.vocab_size);
            ex.gold_chunk_id = next_chunk_id + answer_word_offset / kChunkWords;
            world.examples.push_back(std::move(ex));
        }
        world.documents.push_back(std::move(doc));
        next_chunk_id += doc_chunks;
    }
    return world;
}

}  // namespace ragforge
