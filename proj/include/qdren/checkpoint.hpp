#pragma once

#include <filesystem>

#include "qdren/model.hpp"
#include "qdren/vocab.hpp"

namespace qdren {

struct Checkpoint {
    Model model;
    Vocabulary vocab;
};

/// "<prefix>.manifest.json" lists config, dims, vocabulary and each tensor's
/// name, shape, byte offset and byte length; "<prefix>.weights.bin" is the
/// concatenation of the tensors as little-endian float32 in manifest order.
std::filesystem::path manifest_path(const std::filesystem::path& prefix);
std::filesystem::path weights_path(const std::filesystem::path& prefix);

void save_checkpoint(const Model& model, const Vocabulary& vocab, const std::filesystem::path& prefix);

/// Accepts the prefix or the manifest path. Throws CheckpointError on any
/// inconsistency between manifest, blob and model structure.
Checkpoint load_checkpoint(const std::filesystem::path& prefix);

}  // namespace qdren
