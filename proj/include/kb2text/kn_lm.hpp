#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "kb2text/matrix.hpp"

namespace kb2text {

// Interpolated Kneser-Ney n-gram language model over string tokens.
//
// Highest-order counts are raw; every lower order uses continuation (type)
// counts. Each order k gets one absolute discount D_k = n1/(n1 + 2*n2)
// estimated from that order's count-of-count statistics, falling back to
// `fallback_discount` when n1 or n2 is zero. The base distribution is uniform
// over the vocabulary excluding <start> (with <unk> as a regular member), and
// unseen contexts back off directly to the next-lower order.
struct KnConfig {
    int order = 5;
    double fallback_discount = 0.75;
};

class KnModel {
public:
    KnModel() = default;

    // Trains on raw sentences. Leading "<start>" tokens and one trailing
    // "<end>" are stripped if present, so both plain summaries and canonical
    // extended summaries can be fed directly; padding is re-added internally.
    static KnModel train(const std::vector<std::vector<std::string>>& sentences,
                         const KnConfig& cfg = {});

    int order() const { return cfg_.order; }
    const KnConfig& config() const { return cfg_; }
    const std::vector<std::string>& vocab() const { return vocab_; }
    int vocab_size() const { return static_cast<int>(vocab_.size()); }
    const std::vector<double>& discounts() const { return discounts_; }

    int start_id() const { return kStart; }
    int end_id() const { return kEnd; }
    int unk_id() const { return kUnk; }

    // Unknown tokens map to <unk>.
    int token_id(const std::string& token) const;
    const std::string& token(int id) const;

    // p(token | context). `context` holds the preceding token ids in order;
    // shorter histories are treated as <start>-padded, longer ones truncated
    // to the last order-1 entries. Sums to 1 over all ids (p(<start>|·) = 0).
    double prob(const std::vector<int>& context, int token) const;

    // Log probabilities over the whole id space for one context.
    Vector next_log_probs(const std::vector<int>& context) const;

    // Joint log probability of a sentence including its <end> transition.
    // Accepts raw or canonical-padded sentences like train().
    double sequence_log_prob(const std::vector<std::string>& sentence) const;

    // exp(-mean log p) per predicted token (sentence tokens plus <end>).
    double perplexity(const std::vector<std::vector<std::string>>& sentences) const;

    void save(const std::filesystem::path& path) const;
    static KnModel load(const std::filesystem::path& path);

    static constexpr int kStart = 0;
    static constexpr int kEnd = 1;
    static constexpr int kUnk = 2;

private:
    using CountMap = std::unordered_map<std::string, uint64_t>;

    void derive_stats();
    // p(w | last k-1 ids of ctx) at order k; k = 0 is the uniform base.
    double prob_rec(const uint32_t* ctx, int ctx_len, uint32_t w, int k) const;

    KnConfig cfg_;
    std::vector<std::string> vocab_;  // id -> token; 0..2 are the specials
    std::unordered_map<std::string, int> token_ids_;
    std::vector<double> discounts_;      // discounts_[k-1] for order k
    std::vector<CountMap> counts_;       // counts_[k-1]: k-gram -> adjusted count
    std::vector<CountMap> ctx_totals_;   // ctx_totals_[k-1]: (k-1)-gram -> sum of counts
    std::vector<CountMap> ctx_types_;    // ctx_types_[k-1]: (k-1)-gram -> distinct continuations
};

// Beam-search adapter over the n-gram distribution.
struct KnScorer {
    const KnModel& model;

    using State = std::vector<int>;  // last order-1 token ids

    State init() const { return State(static_cast<size_t>(model.order() > 1 ? model.order() - 1 : 0), KnModel::kStart); }

    std::pair<State, Vector> step(const State& state, int token) const {
        State next = state;
        if (!next.empty()) {
            next.erase(next.begin());
            next.push_back(token);
        }
        return {next, model.next_log_probs(next)};
    }

    int vocab_size() const { return model.vocab_size(); }
};

struct KnGeneration {
    std::vector<std::string> tokens;  // content tokens, specials stripped
    double log_prob = 0;
    bool complete = false;
};

KnGeneration kn_generate(const KnModel& model, int beam_size = 10, int max_len = 60,
                         bool prefer_complete = true);

}  // namespace kb2text
