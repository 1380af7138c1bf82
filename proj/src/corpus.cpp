#include "kb2text/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_set>

#include <json.hpp>

#include "kb2text/error.hpp"
#include "kb2text/io_util.hpp"

namespace kb2text {

using ordered_json = nlohmann::ordered_json;

void LabelStore::add(const std::string& lang, const std::string& entity,
                     const std::string& label) {
    by_lang_[lang][entity] = label;
}

std::optional<std::string> LabelStore::get(const std::string& lang,
                                           const std::string& entity) const {
    auto lang_it = by_lang_.find(lang);
    if (lang_it == by_lang_.end()) return std::nullopt;
    auto it = lang_it->second.find(entity);
    if (it == lang_it->second.end()) return std::nullopt;
    return it->second;
}

std::vector<std::string> LabelStore::all_labels(const std::string& entity) const {
    std::vector<std::string> out;
    for (const auto& lang : chain_) {
        auto label = get(lang, entity);
        if (label && std::find(out.begin(), out.end(), *label) == out.end())
            out.push_back(*label);
    }
    return out;
}

std::optional<std::string> resolve_label(const LabelStore& store, const std::string& entity,
                                         const std::string& language) {
    auto direct = store.get(language, entity);
    if (direct) return direct;
    for (const auto& lang : store.fallback_chain()) {
        if (lang == language) continue;
        auto label = store.get(lang, entity);
        if (label) return label;
    }
    return std::nullopt;
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) {
            tokens.push_back(current);
            current.clear();
        }
    };
    for (unsigned char c : text) {
        if (c < 0x80 && std::isspace(c)) {
            flush();
        } else if (c < 0x80 && std::ispunct(c)) {
            flush();
            tokens.push_back(std::string(1, static_cast<char>(c)));
        } else {
            current.push_back(static_cast<char>(c));
        }
    }
    flush();
    return tokens;
}

namespace {

std::string ascii_lower(const std::string& s) {
    std::string out = s;
    for (char& c : out)
        if (static_cast<unsigned char>(c) < 0x80)
            c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string join_tokens(const std::vector<std::string>& tokens, size_t start, size_t len) {
    std::string out;
    for (size_t i = start; i < start + len; ++i) {
        if (i > start) out += ' ';
        out += tokens[i];
    }
    return out;
}

std::vector<std::string> split_on_spaces(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

}  // namespace

std::vector<EntityMatch> match_entities(const std::vector<std::string>& summary,
                                        const std::vector<Triple>& triples,
                                        const LabelStore& store,
                                        const std::string& main_entity) {
    // Normalised label -> candidate entity ids.
    std::unordered_map<std::string, std::vector<std::string>> by_label;
    std::set<size_t> lengths;
    std::set<std::string> entities;
    for (const auto& t : triples) {
        entities.insert(t.subject_id);
        entities.insert(t.object_id);
    }
    for (const auto& entity : entities) {
        for (const auto& label : store.all_labels(entity)) {
            auto toks = tokenize(label);
            if (toks.empty()) continue;
            std::string key = ascii_lower(join_tokens(toks, 0, toks.size()));
            auto& cands = by_label[key];
            if (std::find(cands.begin(), cands.end(), entity) == cands.end())
                cands.push_back(entity);
            lengths.insert(toks.size());
        }
    }

    std::vector<EntityMatch> matches;
    size_t i = 0;
    while (i < summary.size()) {
        bool hit = false;
        for (auto it = lengths.rbegin(); it != lengths.rend() && !hit; ++it) {
            size_t len = *it;
            if (len == 0 || i + len > summary.size()) continue;
            std::string key = ascii_lower(join_tokens(summary, i, len));
            auto found = by_label.find(key);
            if (found == by_label.end()) continue;
            std::string chosen;
            for (const auto& cand : found->second) {
                if (cand == main_entity) {
                    chosen = cand;
                    break;
                }
                if (chosen.empty() || cand < chosen) chosen = cand;
            }
            matches.push_back({i, len, chosen, join_tokens(summary, i, len)});
            i += len;
            hit = true;
        }
        if (!hit) ++i;
    }
    return matches;
}

std::optional<std::string> placeholder_label(const std::vector<Triple>& triples,
                                             const std::string& property_id,
                                             const std::string& main_entity) {
    const Triple* best = nullptr;
    for (const auto& t : triples) {
        if (t.property_id != property_id) continue;
        if (!best || std::tie(t.subject_id, t.object_id) <
                         std::tie(best->subject_id, best->object_id))
            best = &t;
    }
    if (!best) return std::nullopt;
    return best->object_id == main_entity ? best->subject_label : best->object_label;
}

ExtendResult extend_summary(const std::vector<std::string>& tokens,
                            const std::vector<EntityMatch>& matches,
                            const std::string& main_entity,
                            const std::vector<Triple>& triples,
                            const std::function<bool(const std::string&)>& is_frequent) {
    std::map<size_t, const EntityMatch*> at;
    for (const auto& m : matches) at[m.start] = &m;

    ExtendResult res;
    size_t i = 0;
    while (i < tokens.size()) {
        auto it = at.find(i);
        if (it == at.end()) {
            res.extended.push_back(Token::word(tokens[i]));
            ++i;
            continue;
        }
        const EntityMatch& m = *it->second;
        if (m.entity_id == main_entity) {
            res.extended.push_back(Token::entity(m.entity_id, m.surface));
            ++res.surface_form_substitutions;
            i += m.len;
            continue;
        }
        bool rare = false;
        for (size_t k = m.start; k < m.start + m.len; ++k)
            if (!is_frequent(tokens[k])) rare = true;
        if (!rare) {
            for (size_t k = m.start; k < m.start + m.len; ++k)
                res.extended.push_back(Token::word(tokens[k]));
            i += m.len;
            continue;
        }
        // Covering triples: ones whose placeholder resolves back to this
        // mention. Object position always qualifies; subject position only
        // when the main entity sits in the object slot.
        std::set<std::string> properties;
        bool covered = false;
        for (const auto& t : triples) {
            if (t.object_id == m.entity_id ||
                (t.subject_id == m.entity_id && t.object_id == main_entity)) {
                properties.insert(t.property_id);
                covered = true;
            } else if (t.subject_id == m.entity_id) {
                covered = true;
            }
        }
        bool substituted = false;
        for (const auto& p : properties) {
            auto label = placeholder_label(triples, p, main_entity);
            if (label && *label == m.surface) {
                res.extended.push_back(Token::placeholder(p));
                ++res.placeholder_substitutions;
                substituted = true;
                break;
            }
        }
        if (!substituted) {
            if (covered) {
                // A substitution here could not be undone verbatim; keep the
                // words so the extension stays lossless.
                for (size_t k = m.start; k < m.start + m.len; ++k)
                    res.extended.push_back(Token::word(tokens[k]));
            } else {
                res.extended.push_back(Token::special("<resource>"));
                ++res.resource_substitutions;
            }
        }
        i += m.len;
    }
    return res;
}

TripleSetExample finalize_example(TripleSetExample ex, int r_max) {
    if (ex.triples.empty())
        throw ArgumentError("finalize_example: example for " + ex.main_entity +
                            " has no triples");
    if (r_max < 1) throw ArgumentError("finalize_example: r_max must be positive");

    TokenSeq wrapped;
    wrapped.push_back(Token::special("<start>"));
    for (auto& t : ex.extended_summary) wrapped.push_back(std::move(t));
    wrapped.push_back(Token::special("<end>"));
    ex.extended_summary = std::move(wrapped);

    std::set<std::string> referenced;
    for (const auto& t : ex.extended_summary)
        if (t.kind == TokenKind::property_placeholder) referenced.insert(t.property_id);

    std::sort(ex.triples.begin(), ex.triples.end(), [&](const Triple& a, const Triple& b) {
        bool ra = referenced.count(a.property_id) > 0;
        bool rb = referenced.count(b.property_id) > 0;
        return std::tie(rb, a.property_id, a.subject_id, a.object_id) <
               std::tie(ra, b.property_id, b.subject_id, b.object_id);
    });
    if (static_cast<int>(ex.triples.size()) > r_max) ex.triples.resize(r_max);
    return ex;
}

std::vector<std::string> reconstruct_raw(const TripleSetExample& ex) {
    std::vector<std::string> out;
    for (const auto& tok : ex.extended_summary) {
        switch (tok.kind) {
            case TokenKind::word:
                out.push_back(tok.text);
                break;
            case TokenKind::entity_surface_form:
                for (auto& piece : split_on_spaces(tok.text)) out.push_back(piece);
                break;
            case TokenKind::property_placeholder: {
                auto label = placeholder_label(ex.triples, tok.property_id, ex.main_entity);
                if (!label)
                    throw Error("reconstruct_raw: no triple with property " +
                                tok.property_id + " in example " + ex.main_entity);
                for (auto& piece : split_on_spaces(*label)) out.push_back(piece);
                break;
            }
            case TokenKind::special:
                if (tok.text == "<start>" || tok.text == "<end>") break;
                throw Error("reconstruct_raw: token " + tok.text +
                            " is not reconstructible in example " + ex.main_entity);
        }
    }
    return out;
}

namespace {

struct Moments {
    double mean = 0, stdev = 0;
};

Moments moments(const std::vector<double>& xs) {
    if (xs.empty()) return {};
    double mean = 0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size());
    return {mean, std::sqrt(var)};
}

}  // namespace

CorpusStats corpus_stats(const std::vector<TripleSetExample>& corpus) {
    std::vector<double> tokens, triples, linked, aligned;
    std::set<std::string> vocab;
    for (const auto& ex : corpus) {
        tokens.push_back(static_cast<double>(ex.raw_summary.size()));
        triples.push_back(static_cast<double>(ex.triples.size()));
        for (const auto& t : ex.raw_summary) vocab.insert(t);
        long n_linked = 0;
        std::set<std::string> props;
        for (const auto& tok : ex.extended_summary) {
            if (tok.kind == TokenKind::entity_surface_form) ++n_linked;
            if (tok.kind == TokenKind::property_placeholder) {
                ++n_linked;
                props.insert(tok.property_id);
            }
            if (tok.kind == TokenKind::special && tok.text == "<resource>") ++n_linked;
        }
        linked.push_back(static_cast<double>(n_linked));
        aligned.push_back(static_cast<double>(props.size()));
    }
    CorpusStats s;
    auto mt = moments(tokens);
    s.avg_tokens_per_summary = mt.mean;
    s.std_tokens_per_summary = mt.stdev;
    auto mr = moments(triples);
    s.avg_triples_per_example = mr.mean;
    s.std_triples_per_example = mr.stdev;
    auto ml = moments(linked);
    s.avg_linked_entities = ml.mean;
    s.std_linked_entities = ml.stdev;
    auto ma = moments(aligned);
    s.avg_aligned_triples = ma.mean;
    s.std_aligned_triples = ma.stdev;
    s.vocabulary_size = static_cast<long>(vocab.size());
    s.total_summaries = static_cast<long>(corpus.size());
    return s;
}

std::string stats_to_json(const CorpusStats& s) {
    ordered_json j;
    j["summaries"] = s.total_summaries;
    j["tokens_per_summary"] = {{"mean", s.avg_tokens_per_summary},
                               {"std", s.std_tokens_per_summary}};
    j["triples_per_example"] = {{"mean", s.avg_triples_per_example},
                                {"std", s.std_triples_per_example}};
    j["linked_entities_per_summary"] = {{"mean", s.avg_linked_entities},
                                        {"std", s.std_linked_entities}};
    j["aligned_triples_per_summary"] = {{"mean", s.avg_aligned_triples},
                                        {"std", s.std_aligned_triples}};
    j["vocabulary_size"] = s.vocabulary_size;
    return j.dump(2);
}

std::string BuildReport::to_json() const {
    ordered_json j;
    j["articles_read"] = articles_read;
    j["examples_built"] = examples_built;
    j["dropped_empty_summary"] = dropped_empty_summary;
    j["dropped_no_triples"] = dropped_no_triples;
    j["dropped_unaligned"] = dropped_unaligned;
    j["kept_unaligned"] = kept_unaligned;
    j["surface_form_substitutions"] = surface_form_substitutions;
    j["placeholder_substitutions"] = placeholder_substitutions;
    j["resource_substitutions"] = resource_substitutions;
    j["drop_reasons"] = drop_reasons;
    return j.dump(2);
}

BuildResult build_corpus(const std::vector<RawArticle>& articles, const BuildOptions& opt) {
    if (opt.max_words < 1) throw ArgumentError("build_corpus: max_words must be positive");
    if (opt.r_max < 1) throw ArgumentError("build_corpus: r_max must be positive");

    // Frequency cutoff over all summary tokens, the same budget the word
    // vocabulary gets: a token is frequent when it ranks inside the top
    // max_words by (count desc, token asc).
    std::map<std::string, long> freq;
    for (const auto& a : articles)
        for (const auto& tok : tokenize(a.sentence)) ++freq[tok];
    std::vector<std::pair<std::string, long>> ranked(freq.begin(), freq.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::unordered_set<std::string> frequent;
    for (size_t i = 0; i < ranked.size() && i < static_cast<size_t>(opt.max_words); ++i)
        frequent.insert(ranked[i].first);
    auto is_frequent = [&](const std::string& tok) { return frequent.count(tok) > 0; };

    BuildResult result;
    for (const auto& article : articles) {
        ++result.report.articles_read;
        auto raw = tokenize(article.sentence);
        if (raw.empty()) {
            ++result.report.dropped_empty_summary;
            result.report.drop_reasons.push_back(article.main_entity + ": empty summary");
            continue;
        }
        if (article.triples.empty()) {
            ++result.report.dropped_no_triples;
            result.report.drop_reasons.push_back(article.main_entity + ": no triples");
            continue;
        }

        LabelStore store = article.labels;
        std::vector<std::string> chain = {opt.language};
        for (const auto& lang : opt.fallback_chain)
            if (std::find(chain.begin(), chain.end(), lang) == chain.end())
                chain.push_back(lang);
        store.set_fallback_chain(chain);

        TripleSetExample ex;
        ex.main_entity = article.main_entity;
        for (const auto& t : article.triples) {
            Triple resolved = t;
            resolved.subject_label =
                resolve_label(store, t.subject_id, opt.language).value_or(t.subject_id);
            resolved.property_label =
                resolve_label(store, t.property_id, opt.language).value_or(t.property_id);
            resolved.object_label =
                resolve_label(store, t.object_id, opt.language).value_or(t.object_id);
            ex.triples.push_back(std::move(resolved));
        }
        if (!article.instance_type.empty())
            ex.category = resolve_label(store, article.instance_type, opt.language)
                              .value_or(article.instance_type);
        ex.raw_summary = raw;

        std::vector<EntityMatch> matches;
        if (opt.copy_actions)
            matches = match_entities(raw, ex.triples, store, ex.main_entity);
        auto extended =
            extend_summary(raw, matches, ex.main_entity, ex.triples, is_frequent);
        ex.extended_summary = std::move(extended.extended);
        result.report.surface_form_substitutions += extended.surface_form_substitutions;
        result.report.placeholder_substitutions += extended.placeholder_substitutions;
        result.report.resource_substitutions += extended.resource_substitutions;

        bool aligned = extended.surface_form_substitutions +
                           extended.placeholder_substitutions +
                           extended.resource_substitutions >
                       0;
        if (!aligned && opt.copy_actions) {
            if (!opt.keep_unaligned) {
                ++result.report.dropped_unaligned;
                result.report.drop_reasons.push_back(article.main_entity + ": unaligned");
                continue;
            }
            ++result.report.kept_unaligned;
        }

        result.examples.push_back(finalize_example(std::move(ex), opt.r_max));
        ++result.report.examples_built;
    }

    std::stable_sort(result.examples.begin(), result.examples.end(),
                     [](const TripleSetExample& a, const TripleSetExample& b) {
                         return a.main_entity < b.main_entity;
                     });
    return result;
}

// ---------------------------------------------------------------------------
// JSONL

namespace {

const nlohmann::json& require_field(const nlohmann::json& j, const char* name,
                                    long line_no) {
    auto it = j.find(name);
    if (it == j.end()) throw FormatError(std::string("missing field \"") + name + '"', line_no);
    return *it;
}

std::string require_string(const nlohmann::json& j, const char* name, long line_no) {
    const auto& field = require_field(j, name, line_no);
    if (!field.is_string())
        throw FormatError(std::string("field \"") + name + "\" must be a string", line_no);
    return field.get<std::string>();
}

nlohmann::json parse_json_line(const std::string& line, long line_no) {
    try {
        return nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("invalid JSON: ") + e.what(), line_no);
    }
}

}  // namespace

RawArticle article_from_json(const std::string& line, long line_no) {
    auto j = parse_json_line(line, line_no);
    if (!j.is_object()) throw FormatError("article line must be a JSON object", line_no);
    RawArticle a;
    a.main_entity = require_string(j, "main_entity", line_no);
    a.sentence = require_string(j, "sentence", line_no);
    if (j.contains("instance_type") && j["instance_type"].is_string())
        a.instance_type = j["instance_type"].get<std::string>();
    const auto& triples = require_field(j, "triples", line_no);
    if (!triples.is_array())
        throw FormatError("field \"triples\" must be an array", line_no);
    for (const auto& tj : triples) {
        if (!tj.is_object()) throw FormatError("triple must be a JSON object", line_no);
        Triple t;
        t.subject_id = require_string(tj, "s", line_no);
        t.property_id = require_string(tj, "p", line_no);
        t.object_id = require_string(tj, "o", line_no);
        if (tj.contains("labels")) {
            const auto& labels = tj["labels"];
            if (!labels.is_object())
                throw FormatError("triple \"labels\" must be an object", line_no);
            for (auto it = labels.begin(); it != labels.end(); ++it) {
                if (!it.value().is_object())
                    throw FormatError("triple labels for language " + it.key() +
                                          " must be an object",
                                      line_no);
                for (auto side = it.value().begin(); side != it.value().end(); ++side) {
                    std::string entity;
                    if (side.key() == "s") entity = t.subject_id;
                    else if (side.key() == "p") entity = t.property_id;
                    else if (side.key() == "o") entity = t.object_id;
                    else
                        throw FormatError("triple label side must be s, p or o", line_no);
                    if (!side.value().is_string())
                        throw FormatError("triple label must be a string", line_no);
                    a.labels.add(it.key(), entity, side.value().get<std::string>());
                }
            }
        }
        a.triples.push_back(std::move(t));
    }
    if (j.contains("labels")) {
        const auto& labels = j["labels"];
        if (!labels.is_object())
            throw FormatError("article \"labels\" must be an object", line_no);
        for (auto it = labels.begin(); it != labels.end(); ++it) {
            if (!it.value().is_object())
                throw FormatError("article labels for language " + it.key() +
                                      " must be an object",
                                  line_no);
            for (auto e = it.value().begin(); e != it.value().end(); ++e) {
                if (!e.value().is_string())
                    throw FormatError("article label must be a string", line_no);
                a.labels.add(it.key(), e.key(), e.value().get<std::string>());
            }
        }
    }
    return a;
}

std::string article_to_json(const RawArticle& a) {
    ordered_json j;
    j["main_entity"] = a.main_entity;
    if (!a.instance_type.empty()) j["instance_type"] = a.instance_type;
    j["sentence"] = a.sentence;
    auto triples = ordered_json::array();
    for (const auto& t : a.triples)
        triples.push_back(ordered_json{{"s", t.subject_id}, {"p", t.property_id},
                                       {"o", t.object_id}});
    j["triples"] = std::move(triples);
    std::map<std::string, std::map<std::string, std::string>> sorted;
    for (const auto& [lang, entities] : a.labels.contents())
        for (const auto& [entity, label] : entities) sorted[lang][entity] = label;
    if (!sorted.empty()) {
        ordered_json labels;
        for (const auto& [lang, entities] : sorted) {
            ordered_json per_lang;
            for (const auto& [entity, label] : entities) per_lang[entity] = label;
            labels[lang] = std::move(per_lang);
        }
        j["labels"] = std::move(labels);
    }
    return j.dump();
}

std::vector<RawArticle> read_articles_jsonl(const std::filesystem::path& path) {
    std::vector<RawArticle> out;
    for_each_line(path, [&](const std::string& line, long line_no) {
        out.push_back(article_from_json(line, line_no));
    });
    return out;
}

void write_articles_jsonl(const std::filesystem::path& path,
                          const std::vector<RawArticle>& articles) {
    std::string body;
    for (const auto& a : articles) {
        body += article_to_json(a);
        body += '\n';
    }
    atomic_write_file(path, body);
}

TripleSetExample example_from_json(const std::string& line, long line_no) {
    auto j = parse_json_line(line, line_no);
    if (!j.is_object()) throw FormatError("example line must be a JSON object", line_no);
    TripleSetExample ex;
    ex.main_entity = require_string(j, "main_entity", line_no);
    if (j.contains("category") && j["category"].is_string())
        ex.category = j["category"].get<std::string>();
    const auto& triples = require_field(j, "triples", line_no);
    if (!triples.is_array())
        throw FormatError("field \"triples\" must be an array", line_no);
    for (const auto& tj : triples) {
        Triple t;
        t.subject_id = require_string(tj, "s", line_no);
        t.property_id = require_string(tj, "p", line_no);
        t.object_id = require_string(tj, "o", line_no);
        t.subject_label = require_string(tj, "s_label", line_no);
        t.property_label = require_string(tj, "p_label", line_no);
        t.object_label = require_string(tj, "o_label", line_no);
        ex.triples.push_back(std::move(t));
    }
    const auto& raw = require_field(j, "raw_summary", line_no);
    if (!raw.is_array())
        throw FormatError("field \"raw_summary\" must be an array", line_no);
    for (const auto& tok : raw) {
        if (!tok.is_string()) throw FormatError("raw_summary token must be a string", line_no);
        ex.raw_summary.push_back(tok.get<std::string>());
    }
    const auto& ext = require_field(j, "extended_summary", line_no);
    if (!ext.is_array())
        throw FormatError("field \"extended_summary\" must be an array", line_no);
    for (const auto& tok : ext) {
        if (!tok.is_string())
            throw FormatError("extended_summary token must be a string", line_no);
        try {
            ex.extended_summary.push_back(Token::from_canonical(tok.get<std::string>()));
        } catch (const Error& e) {
            throw FormatError(e.what(), line_no);
        }
    }
    return ex;
}

std::string example_to_json(const TripleSetExample& ex) {
    ordered_json j;
    j["main_entity"] = ex.main_entity;
    j["category"] = ex.category;
    auto triples = ordered_json::array();
    for (const auto& t : ex.triples)
        triples.push_back(ordered_json{{"s", t.subject_id},
                                       {"p", t.property_id},
                                       {"o", t.object_id},
                                       {"s_label", t.subject_label},
                                       {"p_label", t.property_label},
                                       {"o_label", t.object_label}});
    j["triples"] = std::move(triples);
    j["raw_summary"] = ex.raw_summary;
    auto ext = ordered_json::array();
    for (const auto& tok : ex.extended_summary) ext.push_back(tok.canonical());
    j["extended_summary"] = std::move(ext);
    return j.dump();
}

std::vector<TripleSetExample> read_corpus_jsonl(const std::filesystem::path& path) {
    std::vector<TripleSetExample> out;
    for_each_line(path, [&](const std::string& line, long line_no) {
        out.push_back(example_from_json(line, line_no));
    });
    return out;
}

void write_corpus_jsonl(const std::filesystem::path& path,
                        const std::vector<TripleSetExample>& examples) {
    std::string body;
    for (const auto& ex : examples) {
        body += example_to_json(ex);
        body += '\n';
    }
    atomic_write_file(path, body);
}

}  // namespace kb2text
