#include "kb2text/generation.hpp"

#include <sstream>

#include "json.hpp"

#include "kb2text/io_util.hpp"

namespace kb2text {

namespace {

void push_label_tokens(std::vector<std::string>& out, const std::string& label) {
    std::istringstream in(label);
    std::string tok;
    while (in >> tok) out.push_back(tok);
}

}  // namespace

std::vector<std::string> resolve_copy_actions(const TokenSeq& tokens,
                                              const std::vector<Triple>& triples,
                                              const std::string& main_entity, Rng& rng,
                                              ResolveStats* stats) {
    ResolveStats local;
    ResolveStats& st = stats ? *stats : local;
    std::vector<std::string> out;
    for (const auto& tok : tokens) {
        switch (tok.kind) {
            case TokenKind::word:
                out.push_back(tok.text);
                break;
            case TokenKind::entity_surface_form:
                push_label_tokens(out, tok.text);
                ++st.surface_forms;
                break;
            case TokenKind::property_placeholder: {
                ++st.placeholders;
                std::vector<const Triple*> candidates;
                for (const auto& t : triples)
                    if (t.property_id == tok.property_id) candidates.push_back(&t);
                if (candidates.empty()) {
                    out.push_back("<resource>");
                    ++st.unresolved_placeholders;
                    break;
                }
                const Triple& pick = *candidates[rng.uniform_int(candidates.size())];
                const std::string& label =
                    pick.object_id == main_entity ? pick.subject_label : pick.object_label;
                push_label_tokens(out, label);
                break;
            }
            case TokenKind::special:
                if (tok.text == "<pad>" || tok.text == "<unk>" || tok.text == "<start>" ||
                    tok.text == "<end>")
                    break;  // never part of the rendered text
                out.push_back(tok.text);
                break;
        }
    }
    return out;
}

GenerationResult generate(ModelParams& model, const EncodedExample& encoded,
                          const TripleSetExample& source, const Vocab& target_vocab,
                          const GenerationConfig& cfg) {
    DecoderScorer scorer{model, encode_triple_set(model.enc, encoded.triples, NormMode::eval)};

    BeamConfig bc;
    bc.beam_size = cfg.beam_size;
    bc.max_len = cfg.max_len;
    bc.start_id = Vocab::kStart;
    bc.end_id = Vocab::kEnd;
    bc.prefer_complete = cfg.prefer_complete;
    BeamResult beam = beam_search(scorer, bc);

    GenerationResult result;
    result.complete = beam.complete;
    result.log_prob = beam.log_prob;

    std::vector<int> inner(beam.tokens.begin(), beam.tokens.end());
    if (!inner.empty() && inner.front() == Vocab::kStart) inner.erase(inner.begin());
    if (!inner.empty() && inner.back() == Vocab::kEnd && beam.complete) inner.pop_back();

    TokenSeq raw = target_vocab.decode(inner);
    result.raw_tokens = to_canonical(raw);

    Rng rng = Rng(cfg.seed).derive(fnv1a(encoded.id));
    result.text =
        resolve_copy_actions(raw, source.triples, source.main_entity, rng, &result.resolve);
    return result;
}

std::string generation_to_json(const std::string& example_id, const GenerationResult& r) {
    nlohmann::ordered_json j;
    j["example_id"] = example_id;
    j["raw_tokens"] = r.raw_tokens;
    std::string joined;
    for (size_t i = 0; i < r.text.size(); ++i) {
        if (i > 0) joined += ' ';
        joined += r.text[i];
    }
    j["text"] = joined;
    j["complete"] = r.complete;
    j["log_prob"] = r.log_prob;
    j["unresolved_placeholders"] = r.resolve.unresolved_placeholders;
    return j.dump();
}

void write_generations_jsonl(const std::filesystem::path& path,
                             const std::vector<std::string>& lines) {
    std::string body;
    for (const auto& l : lines) {
        body += l;
        body += '\n';
    }
    atomic_write_file(path, body);
}

}  // namespace kb2text
