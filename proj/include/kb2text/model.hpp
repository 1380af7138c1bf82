#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>

#include "kb2text/decoder.hpp"
#include "kb2text/encoder.hpp"

namespace kb2text {

struct ModelConfig {
    EncoderConfig enc;
    DecoderConfig dec;

    void validate() const;  // throws ArgumentError on inconsistent dims
    std::string to_json_string() const;
    static ModelConfig from_json_string(const std::string& s);
};

struct ModelParams {
    EncoderParams enc;
    DecoderParams dec;

    ModelParams() = default;
    explicit ModelParams(const ModelConfig& cfg);

    ModelConfig config() const { return {enc.cfg, dec.cfg}; }
    void zero_grad();

    // Visits every Tensor with a stable name; is_weight marks matrices that
    // take L2 regularisation (biases excluded).
    using TensorVisitor = std::function<void(const std::string&, Tensor&, bool is_weight)>;
    void visit(const TensorVisitor& fn);
    using ConstTensorVisitor =
        std::function<void(const std::string&, const Tensor&, bool is_weight)>;
    void cvisit(const ConstTensorVisitor& fn) const;

    // Batch-norm states (their gamma/beta train without L2).
    using BnVisitor = std::function<void(const std::string&, BatchNormState&)>;
    void visit_bn(const BnVisitor& fn);
    using ConstBnVisitor = std::function<void(const std::string&, const BatchNormState&)>;
    void cvisit_bn(const ConstBnVisitor& fn) const;
};

struct CheckpointMeta {
    int epoch = 0;
    double valid_nll = 0.0;
    uint64_t kb_vocab_hash = 0;
    uint64_t target_vocab_hash = 0;
    std::string train_config_json;  // free-form, informational
};

// Versioned binary container: magic, version, JSON header (dims + tensor
// manifest), then raw 64-bit little-endian value blocks.
void save_checkpoint(const std::filesystem::path& path, const ModelParams& model,
                     const CheckpointMeta& meta,
                     const std::map<std::string, AdamState>* adam = nullptr);

struct LoadedCheckpoint {
    ModelParams model;
    CheckpointMeta meta;
    std::map<std::string, AdamState> adam;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

// Load plus vocabulary guard: throws VocabHashError when the checkpoint was
// trained against different vocab content hashes.
LoadedCheckpoint load_checkpoint_checked(const std::filesystem::path& path,
                                         uint64_t kb_vocab_hash,
                                         uint64_t target_vocab_hash);

}  // namespace kb2text
