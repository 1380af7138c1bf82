#include "run_config.hpp"

#include <chrono>
#include <ctime>

#include "json.hpp"

#include "kb2text/error.hpp"
#include "kb2text/io_util.hpp"
#include "kb2text/vocab.hpp"

namespace kb2text::cli {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr LanguagePreset kPresets[] = {
    {"eo", 500, 15000},
    {"ar", 700, 25000},
};

}  // namespace

const LanguagePreset& preset_for(const std::string& language) {
    for (const auto& p : kPresets)
        if (language == p.language) return p;
    return kPresets[0];
}

void RunConfig::finalize() {
    const LanguagePreset& preset = preset_for(language);
    if (d_hidden == 0) d_hidden = preset.d_hidden;
    if (max_words == 0) max_words = preset.max_words;
    if (d_triple == 0) d_triple = d_hidden;
    if (fallback_chain.empty()) {
        fallback_chain.push_back(language);
        if (language != "en") fallback_chain.push_back("en");
    }
}

RunConfig load_run_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path))
        throw MissingArtifactError("config not found: " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("config " + path.string() + ": " + e.what());
    }

    RunConfig cfg;
    try {
        cfg.language = j.value("language", cfg.language);
        cfg.seed = j.value("seed", cfg.seed);
        if (j.contains("build")) {
            const auto& b = j.at("build");
            cfg.fallback_chain =
                b.value("fallback_chain", std::vector<std::string>{});
            cfg.max_words = b.value("max_words", cfg.max_words);
            cfg.placeholder_min_count =
                b.value("placeholder_min_count", cfg.placeholder_min_count);
            cfg.r_max = b.value("r_max", cfg.r_max);
            cfg.copy_actions = b.value("copy_actions", cfg.copy_actions);
            cfg.keep_unaligned = b.value("keep_unaligned", cfg.keep_unaligned);
        }
        if (j.contains("model")) {
            const auto& m = j.at("model");
            cfg.d_emb = m.value("d_emb", cfg.d_emb);
            cfg.d_triple = m.value("d_triple", cfg.d_triple);
            cfg.d_hidden = m.value("d_hidden", cfg.d_hidden);
            cfg.d_emb_out = m.value("d_emb_out", cfg.d_emb_out);
            cfg.n_layers = m.value("n_layers", cfg.n_layers);
            cfg.combine = m.value("combine", cfg.combine);
            cfg.activation = m.value("activation", cfg.activation);
            cfg.max_kb_ids = m.value("max_kb_ids", cfg.max_kb_ids);
        }
        if (j.contains("train")) {
            const auto& t = j.at("train");
            cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
            cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
            cfg.train.l2_coeff = t.value("l2", cfg.train.l2_coeff);
            cfg.train.max_epochs = t.value("max_epochs", cfg.train.max_epochs);
            cfg.train.init_range = t.value("init_range", cfg.train.init_range);
            cfg.train.eval_every = t.value("eval_every", cfg.train.eval_every);
            cfg.train.early_stop_patience = t.value("patience", cfg.train.early_stop_patience);
        }
        if (j.contains("beam")) {
            const auto& b = j.at("beam");
            cfg.beam_size = b.value("beam_size", cfg.beam_size);
            cfg.max_len = b.value("max_len", cfg.max_len);
            cfg.prefer_complete = b.value("prefer_complete", cfg.prefer_complete);
        }
        if (j.contains("baseline")) {
            const auto& b = j.at("baseline");
            cfg.kn_order = b.value("kn_order", cfg.kn_order);
            cfg.kn_beam = b.value("kn_beam", cfg.kn_beam);
            cfg.ir_k = b.value("ir_k", cfg.ir_k);
            cfg.ir_exact_limit = b.value("ir_exact_limit", cfg.ir_exact_limit);
        }
        if (j.contains("eval")) {
            const auto& e = j.at("eval");
            cfg.max_categories = e.value("max_categories", cfg.max_categories);
            cfg.strict_bleu = e.value("strict_bleu", cfg.strict_bleu);
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("config " + path.string() + ": " + e.what());
    }
    return cfg;
}

std::string RunConfig::to_json_string() const {
    ordered_json j;
    j["language"] = language;
    j["seed"] = seed;
    j["build"] = {{"fallback_chain", fallback_chain},
                  {"max_words", max_words},
                  {"placeholder_min_count", placeholder_min_count},
                  {"r_max", r_max},
                  {"copy_actions", copy_actions},
                  {"keep_unaligned", keep_unaligned}};
    j["model"] = {{"d_emb", d_emb},         {"d_triple", d_triple},
                  {"d_hidden", d_hidden},   {"d_emb_out", d_emb_out},
                  {"n_layers", n_layers},   {"combine", combine},
                  {"activation", activation}, {"max_kb_ids", max_kb_ids}};
    j["train"] = nlohmann::json::parse(train.to_json_string());
    j["beam"] = {{"beam_size", beam_size},
                 {"max_len", max_len},
                 {"prefer_complete", prefer_complete}};
    j["baseline"] = {{"kn_order", kn_order},
                     {"kn_beam", kn_beam},
                     {"ir_k", ir_k},
                     {"ir_exact_limit", ir_exact_limit}};
    j["eval"] = {{"max_categories", max_categories}, {"strict_bleu", strict_bleu}};
    return j.dump();
}

void write_manifest(const std::filesystem::path& path, const std::string& command,
                    const RunConfig& cfg, const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs, double wall_seconds) {
    const std::string config_json = cfg.to_json_string();
    ordered_json j;
    j["command"] = command;
    j["version"] = "1.0.0";
    j["seed"] = cfg.seed;
    j["config_hash"] = std::to_string(fnv1a(config_json));
    j["config"] = nlohmann::json::parse(config_json);
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["wall_seconds"] = wall_seconds;
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char stamp[32];
    std::tm tm_utc;
    gmtime_r(&tt, &tm_utc);
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    j["timestamp"] = stamp;
    atomic_write_file(path, j.dump(2) + "\n");
}

}  // namespace kb2text::cli
