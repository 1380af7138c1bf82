#include "kb2text/synthetic.hpp"

#include <cctype>
#include <set>

#include "kb2text/error.hpp"
#include "kb2text/rng.hpp"

namespace kb2text {

namespace {

const char* kTypeWords[] = {"komunumo", "rivero", "insulo", "monto", "urbo",
                            "lago",     "valo",   "kastelo", "ponto", "stacio"};
const char* kConnectors[] = {"de", "en", "apud", "laux", "sur"};

std::string pseudoword(Rng& rng, std::set<std::string>& used, bool capital) {
    static const std::string cons = "bdfgklmnprstvz";
    static const std::string vows = "aeiou";
    for (;;) {
        auto syllables = 2 + rng.uniform_int(2);
        std::string w;
        for (uint64_t s = 0; s < syllables; ++s) {
            w += cons[rng.uniform_int(cons.size())];
            w += vows[rng.uniform_int(vows.size())];
        }
        if (capital) w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
        if (used.insert(w).second) return w;
    }
}

struct Inventory {
    std::vector<std::pair<std::string, std::string>> types;       // id, label
    std::vector<std::pair<std::string, std::string>> attrs;       // frequent pool
    std::vector<std::pair<std::string, std::string>> distractors;
    std::vector<std::string> distractor_props;
    std::vector<std::string> attr_props;  // one per category
};

}  // namespace

SyntheticCorpus generate_synthetic_corpus(uint64_t seed, int n,
                                          const SyntheticSchema& schema) {
    if (n < 1) throw ArgumentError("generate_synthetic_corpus: n must be >= 1");
    if (schema.n_categories < 1)
        throw ArgumentError("generate_synthetic_corpus: need at least one category");

    Rng rng(seed);
    std::set<std::string> used = {"estas", "."};
    for (const char* w : kTypeWords) used.insert(w);
    for (const char* w : kConnectors) used.insert(w);

    Inventory inv;
    for (int t = 0; t < schema.n_categories; ++t) {
        std::string label =
            t < 10 ? kTypeWords[t] : "speco" + std::to_string(t);
        used.insert(label);
        inv.types.emplace_back("Q" + std::to_string(101 + t), label);
        inv.attr_props.push_back("P" + std::to_string(17 + t));
    }
    for (int i = 0; i < schema.n_frequent_attrs; ++i)
        inv.attrs.emplace_back("Q" + std::to_string(201 + i), pseudoword(rng, used, true));
    for (int i = 0; i < schema.n_distractor_entities; ++i)
        inv.distractors.emplace_back("Q" + std::to_string(8001 + i),
                                     pseudoword(rng, used, true));
    for (int i = 0; i < schema.n_distractor_properties; ++i)
        inv.distractor_props.push_back("P" + std::to_string(901 + i));

    long rare_counter = 0;
    SyntheticCorpus out;

    auto make_article = [&](Rng& r, const std::string& main_id,
                            const std::string& main_label, double rare_rate) {
        auto cat = r.uniform_int(static_cast<uint64_t>(schema.n_categories));
        const auto& [type_id, type_label] = inv.types[cat];
        const std::string& attr_prop = inv.attr_props[cat];
        const char* conn = kConnectors[cat % 5];

        std::string attr_id, attr_label;
        bool rare = r.uniform() < rare_rate;
        if (rare) {
            attr_id = "Q" + std::to_string(50001 + rare_counter++);
            attr_label = pseudoword(r, used, true);
            if (r.uniform() < schema.multi_token_label_rate)
                attr_label += " " + pseudoword(r, used, true);
            out.rare_labels[main_id] = attr_label;
        } else {
            const auto& pick = inv.attrs[r.uniform_int(inv.attrs.size())];
            attr_id = pick.first;
            attr_label = pick.second;
        }

        RawArticle a;
        a.main_entity = main_id;
        a.instance_type = type_id;
        a.sentence = main_label + " estas " + type_label + " " + conn + " " +
                     attr_label + " .";

        auto add_triple = [&](const std::string& s, const std::string& p,
                              const std::string& o) {
            a.triples.push_back({s, p, o, "", "", ""});
        };
        add_triple(main_id, "P31", type_id);
        add_triple(main_id, attr_prop, attr_id);
        auto n_extra = schema.max_distractors > 0
                           ? r.uniform_int(static_cast<uint64_t>(schema.max_distractors) + 1)
                           : 0;
        std::vector<size_t> pool(inv.distractors.size());
        for (size_t i = 0; i < pool.size(); ++i) pool[i] = i;
        r.shuffle(pool);
        for (uint64_t k = 0; k < n_extra && k < pool.size(); ++k) {
            const auto& d = inv.distractors[pool[k]];
            add_triple(main_id, inv.distractor_props[r.uniform_int(inv.distractor_props.size())],
                       d.first);
        }

        const std::string& lang = schema.language;
        a.labels.add(lang, main_id, main_label);
        a.labels.add(lang, type_id, type_label);
        a.labels.add(lang, attr_id, attr_label);
        a.labels.add(lang, "P31", "tipo");
        a.labels.add(lang, attr_prop, "atributo");
        for (const auto& d : inv.distractors) a.labels.add(lang, d.first, d.second);
        for (const auto& p : inv.distractor_props) a.labels.add(lang, p, "krom");
        return a;
    };

    for (int i = 0; i < n; ++i) {
        std::string main_id = "Q" + std::to_string(1001 + i);
        std::string main_label = pseudoword(rng, used, true);
        out.train_articles.push_back(
            make_article(rng, main_id, main_label, schema.rare_entity_rate));
    }
    Rng heldout_rng = rng.derive(1);
    for (int i = 0; i < schema.n_heldout; ++i) {
        std::string main_id = "Q" + std::to_string(90001 + i);
        std::string main_label = pseudoword(heldout_rng, used, true);
        out.heldout_articles.push_back(
            make_article(heldout_rng, main_id, main_label, schema.heldout_rare_rate));
    }

    // Frequency cutoff: tokens seen at least twice across both splits count as
    // frequent, so fresh entity labels land outside the word budget.
    std::map<std::string, long> freq;
    auto count = [&](const std::vector<RawArticle>& arts) {
        for (const auto& a : arts)
            for (const auto& tok : tokenize(a.sentence)) ++freq[tok];
    };
    count(out.train_articles);
    count(out.heldout_articles);
    long frequent = 0;
    for (const auto& [tok, c] : freq)
        if (c >= 2) ++frequent;
    out.build.language = schema.language;
    out.build.fallback_chain = {schema.language};
    out.build.max_words = static_cast<int>(frequent > 0 ? frequent : 1);
    return out;
}

}  // namespace kb2text
