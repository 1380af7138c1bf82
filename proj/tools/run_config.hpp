#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kb2text/trainer.hpp"

namespace kb2text::cli {

// One config file per run; language presets fill d_hidden and the target
// vocabulary budget when those fields are absent, and flags override the
// file. Defaults follow the reference training setup.
struct RunConfig {
    std::string language = "eo";
    uint64_t seed = 1;

    // corpus building
    std::vector<std::string> fallback_chain;  // empty -> {language, "en"}
    int max_words = 0;                        // 0 -> language preset
    int placeholder_min_count = 20;
    int r_max = 32;
    bool copy_actions = true;
    bool keep_unaligned = true;

    // model dimensions
    int d_emb = 100;
    int d_triple = 0;  // 0 -> d_hidden
    int d_hidden = 0;  // 0 -> language preset
    int d_emb_out = 100;
    int n_layers = 1;
    std::string combine = "sum";
    std::string activation = "tanh";
    int max_kb_ids = 50000;

    TrainConfig train;

    // generation
    int beam_size = 20;
    int max_len = 60;
    bool prefer_complete = true;

    // baselines
    int kn_order = 5;
    int kn_beam = 10;
    int ir_k = 0;  // 0 -> min(128, #docs, #terms)
    int ir_exact_limit = 200;

    // evaluation
    int max_categories = 50;
    bool strict_bleu = false;

    // Resolves preset-dependent zeros; call after loading and overrides.
    void finalize();

    std::string to_json_string() const;
};

// Parses the file and applies the language preset for absent fields.
RunConfig load_run_config(const std::filesystem::path& path);

struct LanguagePreset {
    const char* language;
    int d_hidden;
    int max_words;
};

// Preset table; unknown languages fall back to the "eo" row's sizes.
const LanguagePreset& preset_for(const std::string& language);

// Run manifest written next to each command's primary output.
void write_manifest(const std::filesystem::path& path, const std::string& command,
                    const RunConfig& cfg, const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs, double wall_seconds);

}  // namespace kb2text::cli
