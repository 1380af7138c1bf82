#pragma once

#include <algorithm>
#include <utility>
#include <vector>

#include "kb2text/error.hpp"
#include "kb2text/matrix.hpp"

namespace kb2text {

// Scorer contract shared by the neural decoder and the n-gram baseline:
//   using State = ...;                  copyable decoding state
//   State init() const;                 state before any token is consumed
//   std::pair<State, Vector> step(const State&, int token) const;
//       consumes `token`, returns the next state and the log-probability
//       vector over the next token
//   int vocab_size() const;

struct BeamConfig {
    int beam_size = 20;
    int max_len = 60;  // generated tokens after <start>, including <end>
    int start_id = 0;
    int end_id = 1;
    // Complete hypotheses beat incomplete ones regardless of score; false
    // returns the raw highest-probability candidate.
    bool prefer_complete = true;
};

struct BeamResult {
    std::vector<int> tokens;  // starts with start_id; ends with end_id iff complete
    double log_prob = 0;
    bool complete = false;
};

template <typename Scorer>
BeamResult beam_search(const Scorer& scorer, const BeamConfig& cfg) {
    if (cfg.beam_size < 1) throw ArgumentError("beam_search: beam_size must be >= 1");
    if (cfg.max_len < 1) throw ArgumentError("beam_search: max_len must be >= 1");

    using State = typename Scorer::State;
    struct Hyp {
        std::vector<int> tokens;
        double log_prob;
        State state;
    };

    std::vector<Hyp> live;
    live.push_back({{cfg.start_id}, 0.0, scorer.init()});
    std::vector<BeamResult> finished;

    struct Expansion {
        double score;
        size_t parent;
        int token;
    };

    for (int len = 0; len < cfg.max_len && !live.empty(); ++len) {
        std::vector<State> next_states;
        next_states.reserve(live.size());
        std::vector<Expansion> expansions;
        for (size_t p = 0; p < live.size(); ++p) {
            auto [state, logp] = scorer.step(live[p].state, live[p].tokens.back());
            next_states.push_back(std::move(state));
            expansions.reserve(expansions.size() + logp.size());
            for (size_t v = 0; v < logp.size(); ++v)
                expansions.push_back(
                    {live[p].log_prob + static_cast<double>(logp[v]), p, static_cast<int>(v)});
        }
        // Score-descending; ties by token index, then parent index.
        const size_t keep = std::min(expansions.size(), static_cast<size_t>(cfg.beam_size));
        std::partial_sort(expansions.begin(), expansions.begin() + static_cast<long>(keep),
                          expansions.end(), [](const Expansion& a, const Expansion& b) {
                              if (a.score != b.score) return a.score > b.score;
                              if (a.token != b.token) return a.token < b.token;
                              return a.parent < b.parent;
                          });

        std::vector<Hyp> next_live;
        for (size_t i = 0; i < keep; ++i) {
            const Expansion& e = expansions[i];
            std::vector<int> tokens = live[e.parent].tokens;
            tokens.push_back(e.token);
            if (e.token == cfg.end_id) {
                finished.push_back({std::move(tokens), e.score, true});
            } else {
                next_live.push_back({std::move(tokens), e.score, next_states[e.parent]});
            }
        }
        live = std::move(next_live);
    }

    auto better = [](const BeamResult& a, const BeamResult& b) {
        if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
        return a.tokens < b.tokens;
    };

    BeamResult best_finished;
    bool have_finished = false;
    for (auto& f : finished) {
        if (!have_finished || better(f, best_finished)) {
            best_finished = f;
            have_finished = true;
        }
    }
    BeamResult best_live;
    bool have_live = false;
    for (auto& h : live) {
        BeamResult r{h.tokens, h.log_prob, false};
        if (!have_live || better(r, best_live)) {
            best_live = std::move(r);
            have_live = true;
        }
    }

    if (cfg.prefer_complete) {
        if (have_finished) return best_finished;
        if (have_live) return best_live;
    } else {
        if (have_finished && have_live)
            return better(best_finished, best_live) ? best_finished : best_live;
        if (have_finished) return best_finished;
        if (have_live) return best_live;
    }
    // max_len 0 live exhaustion cannot happen (start never equals end), but
    // keep a defined result.
    return BeamResult{{cfg.start_id}, 0.0, false};
}

}  // namespace kb2text
