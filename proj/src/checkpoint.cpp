#include "ragforge/checkpoint.hpp"

#include <fstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

namespace ragforge {

using nlohmann::json;

namespace {

constexpr uint32_t kFormatVersion = 1;

struct TensorRef {
    std::string name;
    std::vector<size_t> shape;
    const std::vector<double>* values;
    std::vector<double>* mut = nullptr;
};

// Fixed manifest order; the payload is laid out the same way.
std::vector<TensorRef> tensor_table(ModelParams& p) {
    auto mat = [](const char* name, MatD& m) {
        return TensorRef{name, {m.rows(), m.cols()}, &m.data(), &m.data()};
    };
    auto vec = [](const char* name, std::vector<double>& v) {
        return TensorRef{name, {v.size()}, &v, &v};
    };
    return {
        mat("question.E", p.encoders.question.embeddings),
        mat("question.W", p.encoders.question.projection),
        vec("question.b", p.encoders.question.bias),
        mat("passage.E", p.encoders.passage.embeddings),
        mat("passage.W", p.encoders.passage.projection),
        vec("passage.b", p.encoders.passage.bias),
        mat("generator.A", p.generator.token_embeddings),
        mat("generator.G", p.generator.hidden_map),
        vec("generator.c", p.generator.hidden_bias),
        mat("generator.U", p.generator.output_map),
    };
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const CheckpointMeta& meta) {
    auto& mut = const_cast<ModelParams&>(params);  // table is read-only here
    const auto tensors = tensor_table(mut);

    json manifest = {
        {"format_version", kFormatVersion},
        {"V", meta.dims.vocab_size},
        {"d", meta.dims.emb_dim},
        {"d_g", meta.dims.gen_ctx_dim},
        {"h", meta.dims.gen_hidden_dim},
        {"seed", meta.seed},
        {"step", meta.step},
        {"mode", meta.mode},
    };
    json tensor_list = json::array();
    for (const auto& t : tensors) {
        tensor_list.push_back({{"name", t.name}, {"shape", t.shape}});
    }
    manifest["tensors"] = tensor_list;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out << manifest.dump() << '\n';
    for (const auto& t : tensors) {
        std::vector<float> payload(t.values->size());
        for (size_t i = 0; i < payload.size(); ++i)
            payload[i] = static_cast<float>((*t.values)[i]);
        out.write(reinterpret_cast<const char*>(payload.data()),
                  static_cast<std::streamsize>(payload.size() * sizeof(float)));
    }
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    std::string manifest_line;
    if (!std::getline(in, manifest_line))
        throw std::runtime_error("checkpoint missing manifest: " + path);
    json manifest = json::parse(manifest_line, nullptr, false);
    if (manifest.is_discarded() || !manifest.is_object())
        throw std::runtime_error("checkpoint manifest is not valid JSON: " + path);
    if (!manifest.contains("format_version") ||
        manifest["format_version"].get<uint32_t>() != kFormatVersion)
        throw std::runtime_error("unsupported checkpoint format version in " + path);

    LoadedCheckpoint loaded;
    loaded.meta.dims.vocab_size = manifest.at("V").get<uint32_t>();
    loaded.meta.dims.emb_dim = manifest.at("d").get<uint32_t>();
    loaded.meta.dims.gen_ctx_dim = manifest.at("d_g").get<uint32_t>();
    loaded.meta.dims.gen_hidden_dim = manifest.at("h").get<uint32_t>();
    loaded.meta.seed = manifest.at("seed").get<uint64_t>();
    loaded.meta.step = manifest.at("step").get<uint64_t>();
    loaded.meta.mode = manifest.at("mode").get<std::string>();

    const auto& dims = loaded.meta.dims;
    loaded.params.encoders.question.embeddings = MatD(dims.vocab_size, dims.emb_dim);
    loaded.params.encoders.question.projection = MatD(dims.emb_dim, dims.emb_dim);
    loaded.params.encoders.question.bias.assign(dims.emb_dim, 0.0);
    loaded.params.encoders.passage = loaded.params.encoders.question;
    loaded.params.generator.token_embeddings = MatD(dims.vocab_size + 2, dims.gen_ctx_dim);
    loaded.params.generator.hidden_map = MatD(dims.gen_hidden_dim, 3 * dims.gen_ctx_dim);
    loaded.params.generator.hidden_bias.assign(dims.gen_hidden_dim, 0.0);
    loaded.params.generator.output_map = MatD(dims.vocab_size + 1, dims.gen_hidden_dim);

    auto tensors = tensor_table(loaded.params);
    const auto& listed = manifest.at("tensors");
    if (!listed.is_array() || listed.size() != tensors.size())
        throw std::runtime_error("checkpoint manifest lists wrong tensor count in " + path);
    for (size_t i = 0; i < tensors.size(); ++i) {
        const auto& entry = listed[i];
        const auto name = entry.at("name").get<std::string>();
        const auto shape = entry.at("shape").get<std::vector<size_t>>();
        if (name != tensors[i].name)
            throw std::runtime_error("checkpoint tensor \"" + name + "\" unexpected (wanted \"" +
                                     tensors[i].name + "\") in " + path);
        if (shape != tensors[i].shape)
            throw std::runtime_error("checkpoint tensor \"" + name + "\" shape mismatch in " +
                                     path);
    }

    for (auto& t : tensors) {
        std::vector<float> payload(t.mut->size());
        in.read(reinterpret_cast<char*>(payload.data()),
                static_cast<std::streamsize>(payload.size() * sizeof(float)));
        if (!in)
            throw std::runtime_error("checkpoint payload truncated at tensor \"" + t.name +
                                     "\" in " + path);
        for (size_t i = 0; i < payload.size(); ++i)
            (*t.mut)[i] = static_cast<double>(payload[i]);
    }
    if (in.peek() != std::char_traits<char>::eof())
        throw std::runtime_error("checkpoint has trailing bytes after payload: " + path);
    return loaded;
}

}  // namespace ragforge
