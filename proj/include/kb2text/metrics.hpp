#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "kb2text/corpus.hpp"
#include "kb2text/generation.hpp"

namespace kb2text {

using TokenList = std::vector<std::string>;

// Whitespace tokenizer for metric inputs (generated text is space-joined).
TokenList split_tokens(const std::string& text);

// Corpus-level BLEU with clipped modified n-gram precisions, geometric mean
// over orders 1..max_n and brevity penalty exp(1 - r/c) for c <= r. With
// `smooth`, a zero numerator at some order is replaced by 1/(2 * denominator);
// without it any zero precision makes the score 0.
double bleu(const std::vector<TokenList>& candidates, const std::vector<TokenList>& references,
            int max_n = 4, bool smooth = true);

double sentence_bleu(const TokenList& candidate, const TokenList& reference, int max_n = 4,
                     bool smooth = true);

size_t lcs_length(const TokenList& a, const TokenList& b);

// LCS F-score with recall weighted by beta.
double rouge_l(const TokenList& candidate, const TokenList& reference, double beta = 1.2);

struct MeteorAlignment {
    size_t matches = 0;
    size_t chunks = 0;
};

// Maximal exact-match unigram alignment minimizing the number of chunks
// (contiguous-in-both runs), found with a wide beam over candidate positions.
MeteorAlignment meteor_align(const TokenList& candidate, const TokenList& reference);

// F10 harmonic mean with the cubic fragmentation penalty 0.5*(chunks/matches)^3.
double meteor_exact(const TokenList& candidate, const TokenList& reference);

// Keeps generations that produced <end>; the dropped count feeds the report.
std::pair<std::vector<GenerationResult>, size_t> filter_complete(
    const std::vector<GenerationResult>& results);

struct FiveNumber {
    double min = 0;
    double q1 = 0;
    double median = 0;
    double q3 = 0;
    double max = 0;
    size_t n = 0;
};

// Quartiles by linear interpolation on the sorted values.
FiveNumber five_number_summary(std::vector<double> values);

// example id -> category label, keeping the `max_categories` most frequent
// labels and folding the rest into "other".
struct CategoryAssignment {
    std::unordered_map<std::string, std::string> by_example;
    std::vector<std::string> categories;  // retained inventory, most frequent first
};

CategoryAssignment assign_categories(const std::vector<TripleSetExample>& examples,
                                     size_t max_categories = 50);

struct EvalItem {
    std::string id;
    TokenList candidate;
    TokenList reference;
    bool complete = true;
    std::string category;  // empty folds into "other"
};

struct PerExampleScores {
    std::string id;
    double bleu4 = 0;
    double rouge_l = 0;
    double meteor = 0;
    std::string category;
};

struct EvalReport {
    size_t total = 0;
    size_t excluded = 0;  // incomplete candidates, removed before scoring
    double bleu_n[4] = {0, 0, 0, 0};
    double rouge_l = 0;  // mean of per-example F
    double meteor = 0;   // mean of per-example scores
    std::vector<PerExampleScores> per_example;
    std::map<std::string, FiveNumber> category_bleu4;

    std::string to_json_string() const;
    // Scores scaled by 100, one row per metric.
    std::string to_table() const;
};

EvalReport evaluate(const std::vector<EvalItem>& items, size_t max_categories = 50,
                    bool smooth = true);

}  // namespace kb2text
