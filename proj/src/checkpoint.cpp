#include "qdren/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "qdren/config_io.hpp"

namespace qdren {

namespace {

using nlohmann::json;

constexpr std::string_view kFormat = "qdren-checkpoint";
constexpr int kVersion = 1;
constexpr std::string_view kManifestSuffix = ".manifest.json";

std::filesystem::path strip_suffix(const std::filesystem::path& p) {
    const std::string s = p.string();
    if (s.size() > kManifestSuffix.size() && s.ends_with(kManifestSuffix)) {
        return s.substr(0, s.size() - kManifestSuffix.size());
    }
    return p;
}

std::uint32_t to_little_endian(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        v = ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
    }
    return v;
}

}  // namespace

std::filesystem::path manifest_path(const std::filesystem::path& prefix) {
    return strip_suffix(prefix).string() + std::string(kManifestSuffix);
}

std::filesystem::path weights_path(const std::filesystem::path& prefix) {
    return strip_suffix(prefix).string() + ".weights.bin";
}

void save_checkpoint(const Model& model, const Vocabulary& vocab, const std::filesystem::path& prefix) {
    json tensors = json::array();
    std::string blob;
    for (const auto& e : model.params.entries()) {
        const std::size_t offset = blob.size();
        for (float v : e.value.data()) {
            const std::uint32_t bits = to_little_endian(std::bit_cast<std::uint32_t>(v));
            char bytes[4];
            std::memcpy(bytes, &bits, 4);
            blob.append(bytes, 4);
        }
        tensors.push_back({{"name", e.name},
                           {"shape", e.value.shape()},
                           {"offset", offset},
                           {"bytes", blob.size() - offset}});
    }
    json manifest{
        {"format", kFormat},
        {"version", kVersion},
        {"config", config_to_json(model.config)},
        {"dims",
         {{"vocab_size", model.dims.vocab_size},
          {"max_sentence_len", model.dims.max_sentence_len},
          {"max_question_len", model.dims.max_question_len},
          {"answer_ids", model.dims.answer_ids}}},
        {"vocabulary", vocab.tokens()},
        {"weights", weights_path(prefix).filename().string()},
        {"total_bytes", blob.size()},
        {"tensors", tensors},
    };

    std::ofstream w(weights_path(prefix), std::ios::binary | std::ios::trunc);
    if (!w) throw CheckpointError("cannot write " + weights_path(prefix).string());
    w.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    std::ofstream m(manifest_path(prefix), std::ios::trunc);
    if (!m) throw CheckpointError("cannot write " + manifest_path(prefix).string());
    m << manifest.dump(2) << '\n';
    if (!w || !m) throw CheckpointError("failed writing checkpoint " + prefix.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& prefix) {
    std::ifstream m(manifest_path(prefix));
    if (!m) throw CheckpointError("cannot open " + manifest_path(prefix).string());
    json manifest;
    try {
        manifest = json::parse(m);
    } catch (const json::exception& e) {
        throw CheckpointError(std::string("corrupt manifest: ") + e.what());
    }

    std::ifstream w(weights_path(prefix), std::ios::binary);
    if (!w) throw CheckpointError("cannot open " + weights_path(prefix).string());
    const std::string blob((std::istreambuf_iterator<char>(w)), std::istreambuf_iterator<char>());

    try {
        if (manifest.at("format") != kFormat || manifest.at("version") != kVersion) {
            throw CheckpointError("unsupported checkpoint format");
        }
        Checkpoint ck{{}, Vocabulary(manifest.at("vocabulary").get<std::vector<std::string>>())};
        ck.model.config = config_from_json(manifest.at("config"));
        const auto& dims = manifest.at("dims");
        ck.model.dims.vocab_size = dims.at("vocab_size").get<std::size_t>();
        ck.model.dims.max_sentence_len = dims.at("max_sentence_len").get<std::size_t>();
        ck.model.dims.max_question_len = dims.at("max_question_len").get<std::size_t>();
        ck.model.dims.answer_ids = dims.at("answer_ids").get<std::vector<TokenId>>();
        if (ck.model.dims.vocab_size != ck.vocab.size()) throw CheckpointError("vocabulary size mismatch");
        if (manifest.at("total_bytes").get<std::size_t>() != blob.size()) {
            throw CheckpointError("weights file has " + std::to_string(blob.size()) + " bytes, manifest expects " +
                                  manifest.at("total_bytes").dump());
        }

        // The structure must be exactly what this config and dims produce.
        Rng unused(0);
        const ParamSet expected = init_params(ck.model.config, ck.model.dims, unused);
        const auto& tensors = manifest.at("tensors");
        if (tensors.size() != expected.size()) throw CheckpointError("tensor count mismatch");
        std::size_t cursor = 0;
        for (std::size_t i = 0; i < tensors.size(); ++i) {
            const auto& t = tensors[i];
            const auto name = t.at("name").get<std::string>();
            const auto shape = t.at("shape").get<Shape>();
            const auto offset = t.at("offset").get<std::size_t>();
            const auto bytes = t.at("bytes").get<std::size_t>();
            if (name != expected.name(i) || shape != expected[i].shape()) {
                throw CheckpointError("tensor '" + name + "' does not match the model structure");
            }
            if (offset != cursor || bytes != 4 * shape_volume(shape) || offset + bytes > blob.size()) {
                throw CheckpointError("tensor '" + name + "' has inconsistent byte range");
            }
            Tensor value(shape);
            for (std::size_t k = 0; k < value.size(); ++k) {
                std::uint32_t bits;
                std::memcpy(&bits, blob.data() + offset + 4 * k, 4);
                value[k] = std::bit_cast<float>(to_little_endian(bits));
            }
            ck.model.params.add(name, std::move(value));
            cursor += bytes;
        }
        if (cursor != blob.size()) throw CheckpointError("trailing bytes in weights file");
        return ck;
    } catch (const CheckpointError&) {
        throw;
    } catch (const std::exception& e) {
        throw CheckpointError(std::string("corrupt manifest: ") + e.what());
    }
}

}  // namespace qdren
