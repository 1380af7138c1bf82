#include "kb2text/model.hpp"

#include <cstring>
#include <fstream>

#include "json.hpp"

#include "kb2text/binfile.hpp"
#include "kb2text/error.hpp"
#include "kb2text/io_util.hpp"

namespace kb2text {

using ordered_json = nlohmann::ordered_json;

namespace {
constexpr char kMagic[8] = {'K', 'B', '2', 'T', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;
}  // namespace

void ModelConfig::validate() const {
    if (enc.vocab_kb < 1 || enc.d_emb < 1 || enc.d_triple < 1 || enc.d_hidden < 1 ||
        enc.r_max < 1)
        throw ArgumentError("model config: encoder dimensions must be positive");
    if (dec.vocab_ext < 1 || dec.d_hidden < 1 || dec.d_emb_out < 1 || dec.n_layers < 1)
        throw ArgumentError("model config: decoder dimensions must be positive");
    if (enc.d_hidden != dec.d_hidden)
        throw ArgumentError("model config: encoder output dim " +
                            std::to_string(enc.d_hidden) + " != decoder hidden dim " +
                            std::to_string(dec.d_hidden));
}

std::string ModelConfig::to_json_string() const {
    ordered_json j;
    j["encoder"] = {{"vocab_kb", enc.vocab_kb},   {"d_emb", enc.d_emb},
                    {"d_triple", enc.d_triple},   {"d_hidden", enc.d_hidden},
                    {"r_max", enc.r_max},         {"activation", to_string(enc.activation)},
                    {"combine", to_string(enc.combine)}};
    j["decoder"] = {{"vocab_ext", dec.vocab_ext},
                    {"d_hidden", dec.d_hidden},
                    {"d_emb_out", dec.d_emb_out},
                    {"n_layers", dec.n_layers}};
    return j.dump();
}

ModelConfig ModelConfig::from_json_string(const std::string& s) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(s);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("model config: invalid JSON: ") + e.what());
    }
    ModelConfig cfg;
    try {
        const auto& e = j.at("encoder");
        cfg.enc.vocab_kb = e.at("vocab_kb").get<int>();
        cfg.enc.d_emb = e.at("d_emb").get<int>();
        cfg.enc.d_triple = e.at("d_triple").get<int>();
        cfg.enc.d_hidden = e.at("d_hidden").get<int>();
        cfg.enc.r_max = e.at("r_max").get<int>();
        cfg.enc.activation = activation_from_string(e.at("activation").get<std::string>());
        cfg.enc.combine = combine_from_string(e.at("combine").get<std::string>());
        const auto& d = j.at("decoder");
        cfg.dec.vocab_ext = d.at("vocab_ext").get<int>();
        cfg.dec.d_hidden = d.at("d_hidden").get<int>();
        cfg.dec.d_emb_out = d.at("d_emb_out").get<int>();
        cfg.dec.n_layers = d.at("n_layers").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("model config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

ModelParams::ModelParams(const ModelConfig& cfg) : enc(cfg.enc), dec(cfg.dec) {
    cfg.validate();
}

void ModelParams::zero_grad() {
    enc.zero_grad();
    dec.zero_grad();
}

void ModelParams::visit(const TensorVisitor& fn) {
    fn("enc.W_in", enc.W_in, true);
    fn("enc.W_h", enc.W_h, true);
    fn("enc.W_F", enc.W_F, true);
    for (size_t l = 0; l < dec.layers.size(); ++l) {
        const std::string p = "dec.layer" + std::to_string(l) + ".";
        auto& layer = dec.layers[l];
        fn(p + "W_z", layer.W_z, true);
        fn(p + "U_z", layer.U_z, true);
        fn(p + "b_z", layer.b_z, false);
        fn(p + "W_r", layer.W_r, true);
        fn(p + "U_r", layer.U_r, true);
        fn(p + "b_r", layer.b_r, false);
        fn(p + "W_n", layer.W_n, true);
        fn(p + "U_n", layer.U_n, true);
        fn(p + "b_n", layer.b_n, false);
    }
    fn("dec.E_out", dec.E_out, true);
    fn("dec.W_out", dec.W_out, true);
    fn("dec.b_out", dec.b_out, false);
}

void ModelParams::cvisit(const ConstTensorVisitor& fn) const {
    const_cast<ModelParams*>(this)->visit(
        [&](const std::string& name, Tensor& t, bool w) { fn(name, t, w); });
}

void ModelParams::visit_bn(const BnVisitor& fn) {
    fn("enc.bn_h", enc.bn_h);
    fn("enc.bn_F", enc.bn_F);
}

void ModelParams::cvisit_bn(const ConstBnVisitor& fn) const {
    const_cast<ModelParams*>(this)->visit_bn(
        [&](const std::string& name, BatchNormState& s) { fn(name, s); });
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& model,
                     const CheckpointMeta& meta,
                     const std::map<std::string, AdamState>* adam) {
    ordered_json header;
    header["format"] = "kb2text-checkpoint";
    header["model"] = nlohmann::json::parse(model.config().to_json_string());
    header["meta"] = {{"epoch", meta.epoch},
                      {"valid_nll", meta.valid_nll},
                      {"kb_vocab_hash", std::to_string(meta.kb_vocab_hash)},
                      {"target_vocab_hash", std::to_string(meta.target_vocab_hash)},
                      {"train_config", meta.train_config_json}};

    std::string blobs;
    auto tensors = ordered_json::array();
    model.cvisit([&](const std::string& name, const Tensor& t, bool) {
        tensors.push_back({{"name", name}, {"rows", t.v.rows()}, {"cols", t.v.cols()}});
        append_matrix(blobs, t.v);
    });
    header["tensors"] = std::move(tensors);

    auto bn = ordered_json::array();
    model.cvisit_bn([&](const std::string& name, const BatchNormState& s) {
        bn.push_back({{"name", name}, {"dim", s.dim()}});
        append_matrix(blobs, s.gamma);
        append_matrix(blobs, s.beta);
        append_vector(blobs, s.running_mean);
        append_vector(blobs, s.running_var);
    });
    header["bn"] = std::move(bn);

    if (adam) {
        auto aj = ordered_json::array();
        for (const auto& [name, state] : *adam) {
            aj.push_back({{"name", name},
                          {"rows", state.m.rows()},
                          {"cols", state.m.cols()},
                          {"step", state.step_count}});
            append_matrix(blobs, state.m);
            append_matrix(blobs, state.v);
        }
        header["adam"] = std::move(aj);
    }

    write_framed_file(path, kMagic, kVersion, header.dump(), blobs);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    const FramedFile file = read_framed_file(path, kMagic, kVersion, "checkpoint");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(file.header_json);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint: invalid header JSON: ") + e.what());
    }

    LoadedCheckpoint out;
    try {
        out.model = ModelParams(ModelConfig::from_json_string(header.at("model").dump()));
        const auto& m = header.at("meta");
        out.meta.epoch = m.at("epoch").get<int>();
        out.meta.valid_nll = m.at("valid_nll").get<double>();
        out.meta.kb_vocab_hash = std::stoull(m.at("kb_vocab_hash").get<std::string>());
        out.meta.target_vocab_hash =
            std::stoull(m.at("target_vocab_hash").get<std::string>());
        out.meta.train_config_json = m.at("train_config").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint: ") + e.what());
    }

    BlobReader reader(file.data, file.blob_offset);

    size_t idx = 0;
    const auto& tensors = header.at("tensors");
    out.model.visit([&](const std::string& name, Tensor& t, bool) {
        if (idx >= tensors.size())
            throw FormatError("checkpoint: tensor manifest too short at " + name);
        const auto& entry = tensors[idx++];
        if (entry.at("name").get<std::string>() != name ||
            entry.at("rows").get<size_t>() != t.v.rows() ||
            entry.at("cols").get<size_t>() != t.v.cols())
            throw FormatError("checkpoint: tensor manifest mismatch at " + name);
        reader.read_matrix(t.v);
    });

    idx = 0;
    const auto& bn = header.at("bn");
    out.model.visit_bn([&](const std::string& name, BatchNormState& s) {
        if (idx >= bn.size())
            throw FormatError("checkpoint: batch-norm manifest too short at " + name);
        const auto& entry = bn[idx++];
        if (entry.at("name").get<std::string>() != name ||
            entry.at("dim").get<size_t>() != s.dim())
            throw FormatError("checkpoint: batch-norm manifest mismatch at " + name);
        reader.read_matrix(s.gamma);
        reader.read_matrix(s.beta);
        reader.read_vector(s.running_mean);
        reader.read_vector(s.running_var);
    });

    if (header.contains("adam")) {
        for (const auto& entry : header.at("adam")) {
            const std::string name = entry.at("name").get<std::string>();
            AdamState state(entry.at("rows").get<size_t>(), entry.at("cols").get<size_t>());
            state.step_count = entry.at("step").get<int64_t>();
            reader.read_matrix(state.m);
            reader.read_matrix(state.v);
            out.adam.emplace(name, std::move(state));
        }
    }
    return out;
}

LoadedCheckpoint load_checkpoint_checked(const std::filesystem::path& path,
                                         uint64_t kb_vocab_hash,
                                         uint64_t target_vocab_hash) {
    LoadedCheckpoint ck = load_checkpoint(path);
    if (ck.meta.kb_vocab_hash != kb_vocab_hash ||
        ck.meta.target_vocab_hash != target_vocab_hash)
        throw VocabHashError("checkpoint " + path.string() +
                             " was trained against different vocabularies");
    return ck;
}

}  // namespace kb2text
