#include "qdren/encoding.hpp"

namespace qdren {

namespace {

Tensor encode_value(std::span<const TokenId> ids, const Tensor& embedding, const Tensor& mask, const char* what) {
    Tape tape;
    auto e = tape.constant(embedding);
    auto m = tape.constant(mask);
    return encode_tokens(e, m, ids, what).value();
}

}  // namespace

Tensor encode_sentence(std::span<const TokenId> ids, const Tensor& embedding, const Tensor& mask) {
    return encode_value(ids, embedding, mask, "sentence");
}

Tensor encode_question(std::span<const TokenId> ids, const Tensor& embedding, const Tensor& mask) {
    return encode_value(ids, embedding, mask, "question");
}

}  // namespace qdren
