#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "kb2text/vocab.hpp"

namespace kb2text {

// A knowledge-base fact with resolved labels.
struct Triple {
    std::string subject_id;
    std::string property_id;
    std::string object_id;
    std::string subject_label;
    std::string property_label;
    std::string object_label;
};

// One aligned training instance.
struct TripleSetExample {
    std::string main_entity;
    std::string category;                  // instance-type label; may be empty
    std::vector<Triple> triples;           // 1 <= size <= r_max after finalize
    std::vector<std::string> raw_summary;  // plain tokens, no <start>/<end>
    TokenSeq extended_summary;             // <start> ... <end>
};

// Per-language entity labels with a fallback chain.
class LabelStore {
public:
    void set_fallback_chain(std::vector<std::string> chain) { chain_ = std::move(chain); }
    const std::vector<std::string>& fallback_chain() const { return chain_; }

    void add(const std::string& lang, const std::string& entity, const std::string& label);
    std::optional<std::string> get(const std::string& lang, const std::string& entity) const;

    // Labels of an entity across the chain languages, chain order, deduped.
    std::vector<std::string> all_labels(const std::string& entity) const;

    using Contents = std::unordered_map<std::string, std::unordered_map<std::string, std::string>>;
    const Contents& contents() const { return by_lang_; }

private:
    Contents by_lang_;
    std::vector<std::string> chain_;
};

// First label found walking the fallback chain, starting at `language`.
std::optional<std::string> resolve_label(const LabelStore& store, const std::string& entity,
                                         const std::string& language);

// Whitespace split plus punctuation split into separate tokens. UTF-8 safe:
// only ASCII punctuation is peeled, multi-byte sequences stay intact.
std::vector<std::string> tokenize(const std::string& text);

struct EntityMatch {
    size_t start = 0;
    size_t len = 0;
    std::string entity_id;
    std::string surface;  // original span tokens joined with single spaces
};

// Maximal non-overlapping spans equal (case-insensitive, whitespace
// normalised) to a label of an entity occurring in the triples. Leftmost,
// then longest; label ties prefer the main entity, then the smaller id.
std::vector<EntityMatch> match_entities(const std::vector<std::string>& summary,
                                        const std::vector<Triple>& triples,
                                        const LabelStore& store,
                                        const std::string& main_entity);

// The label resolve_copy_actions and round-trip reconstruction agree on for
// a placeholder of this property: deterministic first triple by
// (property, subject, object) order; object label unless the main entity is
// the object, in which case the subject label.
std::optional<std::string> placeholder_label(const std::vector<Triple>& triples,
                                             const std::string& property_id,
                                             const std::string& main_entity);

struct ExtendResult {
    TokenSeq extended;
    long surface_form_substitutions = 0;
    long placeholder_substitutions = 0;
    long resource_substitutions = 0;
};

// Applies copy-action substitutions at the data level:
//   main entity mention      -> surface-form tuple carrying the span text
//   rare matched entity with a covering triple whose resolution label
//   reproduces the span      -> that triple's property placeholder
//   rare matched entity with no covering triple -> <resource>
//   frequent entities        -> kept as plain words
// "Rare" means the span contains a token outside the frequency cutoff.
ExtendResult extend_summary(const std::vector<std::string>& tokens,
                            const std::vector<EntityMatch>& matches,
                            const std::string& main_entity,
                            const std::vector<Triple>& triples,
                            const std::function<bool(const std::string&)>& is_frequent);

// Adds <start>/<end> and truncates triples to r_max, keeping triples whose
// property appears in the summary first, then property-id order. Throws
// ArgumentError when the example has no triples.
TripleSetExample finalize_example(TripleSetExample ex, int r_max);

// Substitutes labels back into the extended summary. Throws when a token is
// not reconstructible (<resource>, <pad>, <unk>).
std::vector<std::string> reconstruct_raw(const TripleSetExample& ex);

struct CorpusStats {
    double avg_tokens_per_summary = 0, std_tokens_per_summary = 0;
    double avg_triples_per_example = 0, std_triples_per_example = 0;
    double avg_linked_entities = 0, std_linked_entities = 0;
    double avg_aligned_triples = 0, std_aligned_triples = 0;
    long vocabulary_size = 0;  // distinct raw-summary tokens
    long total_summaries = 0;
};

CorpusStats corpus_stats(const std::vector<TripleSetExample>& corpus);
std::string stats_to_json(const CorpusStats& s);

// ---------------------------------------------------------------------------
// Ingestion: pre-extracted articles, one JSON object per line.

struct RawArticle {
    std::string main_entity;
    std::string instance_type;  // entity id; may be empty
    std::string sentence;
    std::vector<Triple> triples;  // ids; labels resolved via the store
    LabelStore labels;
};

struct BuildOptions {
    std::string language = "eo";
    std::vector<std::string> fallback_chain = {"eo", "en"};
    int max_words = 15000;  // rare-entity cutoff, same budget build_vocab uses
    int r_max = 32;
    bool copy_actions = true;    // false: no substitutions (ablation corpora)
    bool keep_unaligned = true;  // keep summaries with zero matched triples
};

struct BuildReport {
    long articles_read = 0;
    long examples_built = 0;
    long dropped_empty_summary = 0;
    long dropped_no_triples = 0;
    long dropped_unaligned = 0;
    long kept_unaligned = 0;
    long surface_form_substitutions = 0;
    long placeholder_substitutions = 0;
    long resource_substitutions = 0;
    std::vector<std::string> drop_reasons;

    std::string to_json() const;
};

struct BuildResult {
    std::vector<TripleSetExample> examples;  // sorted by main entity id
    BuildReport report;
};

BuildResult build_corpus(const std::vector<RawArticle>& articles, const BuildOptions& opt);

RawArticle article_from_json(const std::string& line, long line_no = 0);
std::string article_to_json(const RawArticle& a);
std::vector<RawArticle> read_articles_jsonl(const std::filesystem::path& path);
void write_articles_jsonl(const std::filesystem::path& path,
                          const std::vector<RawArticle>& articles);

TripleSetExample example_from_json(const std::string& line, long line_no = 0);
std::string example_to_json(const TripleSetExample& ex);
std::vector<TripleSetExample> read_corpus_jsonl(const std::filesystem::path& path);
void write_corpus_jsonl(const std::filesystem::path& path,
                        const std::vector<TripleSetExample>& examples);

}  // namespace kb2text
