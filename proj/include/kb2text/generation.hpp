#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "kb2text/beam.hpp"
#include "kb2text/corpus.hpp"
#include "kb2text/model.hpp"
#include "kb2text/rng.hpp"
#include "kb2text/trainer.hpp"
#include "kb2text/vocab.hpp"

namespace kb2text {

// Beam-search scorer over the trained model (eval mode).
struct DecoderScorer {
    ModelParams& model;
    Vector h_fe;

    using State = DecoderState;
    State init() const { return initial_state(model.dec, h_fe); }
    std::pair<State, Vector> step(const State& s, int token) const {
        State next = s;
        Vector logits = decode_step(model.dec, next, token);
        return {std::move(next), log_softmax(logits)};
    }
    int vocab_size() const { return model.dec.cfg.vocab_ext; }
};

struct GenerationConfig {
    int beam_size = 20;
    int max_len = 60;
    bool prefer_complete = true;  // raw highest-probability result when false
    uint64_t seed = 0;            // copy-resolution randomness
};

struct ResolveStats {
    long placeholders = 0;
    long unresolved_placeholders = 0;
    long surface_forms = 0;
};

// Substitutes copy actions with label text:
//   property placeholder -> object label (subject label when the main entity
//   is the object) of a uniformly random triple sharing the property id;
//   no such triple -> "<resource>" plus a diagnostics count
//   surface-form tuple  -> its stored text
//   <pad>/<unk>         -> dropped from text output
// Multi-token labels are split on spaces to stay comparable with tokenised
// references.
std::vector<std::string> resolve_copy_actions(const TokenSeq& tokens,
                                              const std::vector<Triple>& triples,
                                              const std::string& main_entity, Rng& rng,
                                              ResolveStats* stats = nullptr);

struct GenerationResult {
    std::vector<std::string> raw_tokens;  // canonical forms, <start>/<end> stripped
    std::vector<std::string> text;        // copy actions resolved
    bool complete = false;
    double log_prob = 0;
    ResolveStats resolve;
};

// Encode triples -> beam search -> strip <start>/<end> -> resolve copy
// actions against the source example's triples. Deterministic for
// (model, example, config): the resolution RNG is derived from the config
// seed and the example id.
GenerationResult generate(ModelParams& model, const EncodedExample& encoded,
                          const TripleSetExample& source, const Vocab& target_vocab,
                          const GenerationConfig& cfg);

// One JSON line per example: {example_id, raw_tokens, text, complete, log_prob}.
std::string generation_to_json(const std::string& example_id, const GenerationResult& r);

void write_generations_jsonl(const std::filesystem::path& path,
                             const std::vector<std::string>& lines);

}  // namespace kb2text
