#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "kb2text/corpus.hpp"

namespace kb2text {

// Template configuration for the desk-scale corpus generator.
struct SyntheticSchema {
    int n_categories = 5;          // instance types, each with its own template
    int n_frequent_attrs = 6;      // shared pool of in-vocabulary attribute entities
    double rare_entity_rate = 0.7; // chance the attribute is a fresh unseen entity
    double multi_token_label_rate = 0.0;  // chance a rare label spans two tokens
    int max_distractors = 2;       // unmentioned triples added per example
    int n_distractor_entities = 6;
    int n_distractor_properties = 3;
    int n_heldout = 0;             // extra articles with disjoint label pools
    double heldout_rare_rate = 1.0;
    std::string language = "eo";
};

struct SyntheticCorpus {
    std::vector<RawArticle> train_articles;
    std::vector<RawArticle> heldout_articles;
    // main entity -> the fresh attribute label planted in its sentence
    // (absent when the attribute came from the frequent pool).
    std::map<std::string, std::string> rare_labels;
    // Pipeline options with the frequency cutoff adapted to this corpus:
    // tokens occurring at least twice count as frequent.
    BuildOptions build;
};

// Deterministic for (seed, n, schema); held-out entity labels never collide
// with training ones.
SyntheticCorpus generate_synthetic_corpus(uint64_t seed, int n, const SyntheticSchema& schema);

}  // namespace kb2text
