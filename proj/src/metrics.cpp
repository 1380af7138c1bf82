#include "kb2text/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

#include "kb2text/error.hpp"

namespace kb2text {

using ordered_json = nlohmann::ordered_json;

TokenList split_tokens(const std::string& text) {
    TokenList out;
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

namespace {

// n-gram histogram with '\x1f'-joined keys.
std::unordered_map<std::string, size_t> ngram_counts(const TokenList& tokens, int n) {
    std::unordered_map<std::string, size_t> counts;
    if (static_cast<int>(tokens.size()) < n) return counts;
    for (size_t i = 0; i + static_cast<size_t>(n) <= tokens.size(); ++i) {
        std::string key = tokens[i];
        for (int j = 1; j < n; ++j) {
            key += '\x1f';
            key += tokens[i + static_cast<size_t>(j)];
        }
        ++counts[key];
    }
    return counts;
}

}  // namespace

double bleu(const std::vector<TokenList>& candidates, const std::vector<TokenList>& references,
            int max_n, bool smooth) {
    if (max_n < 1 || max_n > 4) throw ArgumentError("bleu: max_n must be in 1..4");
    if (candidates.empty()) throw ArgumentError("bleu: empty corpus");
    if (candidates.size() != references.size())
        throw ArgumentError("bleu: candidate/reference count mismatch");

    size_t cand_len = 0;
    size_t ref_len = 0;
    std::vector<size_t> matched(static_cast<size_t>(max_n), 0);
    std::vector<size_t> total(static_cast<size_t>(max_n), 0);
    for (size_t i = 0; i < candidates.size(); ++i) {
        cand_len += candidates[i].size();
        ref_len += references[i].size();
        for (int n = 1; n <= max_n; ++n) {
            const auto cand = ngram_counts(candidates[i], n);
            const auto ref = ngram_counts(references[i], n);
            for (const auto& [key, count] : cand) {
                const auto it = ref.find(key);
                if (it != ref.end())
                    matched[static_cast<size_t>(n - 1)] += std::min(count, it->second);
            }
            if (candidates[i].size() + 1 > static_cast<size_t>(n))
                total[static_cast<size_t>(n - 1)] +=
                    candidates[i].size() + 1 - static_cast<size_t>(n);
        }
    }

    double log_sum = 0;
    for (int n = 1; n <= max_n; ++n) {
        const size_t num = matched[static_cast<size_t>(n - 1)];
        const size_t den = total[static_cast<size_t>(n - 1)];
        double p;
        if (den == 0) {
            p = 0;
        } else if (num == 0) {
            p = smooth ? 1.0 / (2.0 * static_cast<double>(den)) : 0.0;
        } else {
            p = static_cast<double>(num) / static_cast<double>(den);
        }
        if (p == 0) return 0;
        log_sum += std::log(p);
    }
    if (cand_len == 0) return 0;
    const double bp =
        cand_len > ref_len
            ? 1.0
            : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len));
    return bp * std::exp(log_sum / max_n);
}

double sentence_bleu(const TokenList& candidate, const TokenList& reference, int max_n,
                     bool smooth) {
    return bleu({candidate}, {reference}, max_n, smooth);
}

size_t lcs_length(const TokenList& a, const TokenList& b) {
    if (a.empty() || b.empty()) return 0;
    std::vector<size_t> prev(b.size() + 1, 0);
    std::vector<size_t> cur(b.size() + 1, 0);
    for (size_t i = 1; i <= a.size(); ++i) {
        for (size_t j = 1; j <= b.size(); ++j) {
            if (a[i - 1] == b[j - 1])
                cur[j] = prev[j - 1] + 1;
            else
                cur[j] = std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double rouge_l(const TokenList& candidate, const TokenList& reference, double beta) {
    if (reference.empty()) throw ArgumentError("rouge_l: empty reference");
    if (candidate.empty()) return 0;
    const double lcs = static_cast<double>(lcs_length(candidate, reference));
    if (lcs == 0) return 0;
    const double p = lcs / static_cast<double>(candidate.size());
    const double r = lcs / static_cast<double>(reference.size());
    const double b2 = beta * beta;
    return (1.0 + b2) * p * r / (r + b2 * p);
}

namespace {

// Beam state while scanning candidate positions left to right.
struct AlignState {
    std::vector<uint64_t> used;  // bitset over reference positions
    int prev_ref = -1;           // reference position matched at the previous
                                 // candidate position, -1 if none
    size_t matches = 0;
    size_t chunks = 0;
};

bool test_bit(const std::vector<uint64_t>& bits, size_t i) {
    return (bits[i >> 6] >> (i & 63)) & 1;
}

void set_bit(std::vector<uint64_t>& bits, size_t i) { bits[i >> 6] |= uint64_t{1} << (i & 63); }

}  // namespace

MeteorAlignment meteor_align(const TokenList& candidate, const TokenList& reference) {
    const size_t beam_width = 512;
    const size_t words = (reference.size() + 63) / 64;

    std::unordered_map<std::string, std::vector<size_t>> ref_positions;
    for (size_t j = 0; j < reference.size(); ++j) ref_positions[reference[j]].push_back(j);

    std::vector<AlignState> beam;
    beam.push_back({std::vector<uint64_t>(std::max(words, size_t{1}), 0), -1, 0, 0});

    for (size_t i = 0; i < candidate.size(); ++i) {
        std::vector<AlignState> next;
        const auto pos_it = ref_positions.find(candidate[i]);
        for (const auto& state : beam) {
            AlignState skip = state;
            skip.prev_ref = -1;
            next.push_back(std::move(skip));
            if (pos_it == ref_positions.end()) continue;
            for (const size_t j : pos_it->second) {
                if (test_bit(state.used, j)) continue;
                AlignState match = state;
                set_bit(match.used, j);
                match.matches += 1;
                match.chunks +=
                    (state.prev_ref >= 0 && static_cast<size_t>(state.prev_ref) + 1 == j) ? 0
                                                                                          : 1;
                match.prev_ref = static_cast<int>(j);
                next.push_back(std::move(match));
            }
        }
        // Deduplicate identical (used, prev_ref) states, keeping fewest chunks.
        std::sort(next.begin(), next.end(), [](const AlignState& a, const AlignState& b) {
            if (a.used != b.used) return a.used < b.used;
            if (a.prev_ref != b.prev_ref) return a.prev_ref < b.prev_ref;
            return a.chunks < b.chunks;
        });
        next.erase(std::unique(next.begin(), next.end(),
                               [](const AlignState& a, const AlignState& b) {
                                   return a.used == b.used && a.prev_ref == b.prev_ref;
                               }),
                   next.end());
        // Matches first so pruning never sacrifices alignment size.
        std::sort(next.begin(), next.end(), [](const AlignState& a, const AlignState& b) {
            if (a.matches != b.matches) return a.matches > b.matches;
            return a.chunks < b.chunks;
        });
        if (next.size() > beam_width) next.resize(beam_width);
        beam = std::move(next);
    }

    MeteorAlignment best;
    for (const auto& state : beam) {
        if (state.matches > best.matches ||
            (state.matches == best.matches && state.chunks < best.chunks)) {
            best.matches = state.matches;
            best.chunks = state.chunks;
        }
    }
    return best;
}

double meteor_exact(const TokenList& candidate, const TokenList& reference) {
    if (candidate.empty() || reference.empty()) return 0;
    const MeteorAlignment a = meteor_align(candidate, reference);
    if (a.matches == 0) return 0;
    const double m = static_cast<double>(a.matches);
    const double p = m / static_cast<double>(candidate.size());
    const double r = m / static_cast<double>(reference.size());
    const double f = 10.0 * p * r / (r + 9.0 * p);
    const double chunk_ratio = static_cast<double>(a.chunks) / m;
    return f * (1.0 - 0.5 * chunk_ratio * chunk_ratio * chunk_ratio);
}

std::pair<std::vector<GenerationResult>, size_t> filter_complete(
    const std::vector<GenerationResult>& results) {
    std::vector<GenerationResult> kept;
    kept.reserve(results.size());
    for (const auto& r : results)
        if (r.complete) kept.push_back(r);
    const size_t excluded = results.size() - kept.size();
    return {std::move(kept), excluded};
}

FiveNumber five_number_summary(std::vector<double> values) {
    if (values.empty()) throw ArgumentError("five_number_summary: no values");
    std::sort(values.begin(), values.end());
    auto quantile = [&](double p) {
        const double h = p * static_cast<double>(values.size() - 1);
        const size_t lo = static_cast<size_t>(h);
        const double frac = h - static_cast<double>(lo);
        if (lo + 1 >= values.size()) return values.back();
        return values[lo] + frac * (values[lo + 1] - values[lo]);
    };
    FiveNumber out;
    out.min = values.front();
    out.q1 = quantile(0.25);
    out.median = quantile(0.5);
    out.q3 = quantile(0.75);
    out.max = values.back();
    out.n = values.size();
    return out;
}

namespace {

// Keeps the `max_categories` most frequent labels (count desc, name asc),
// mapping everything else (and empty labels) to "other".
std::vector<std::string> top_categories(const std::vector<std::string>& labels,
                                        size_t max_categories) {
    std::map<std::string, size_t> counts;
    for (const auto& label : labels)
        if (!label.empty() && label != "other") ++counts[label];
    std::vector<std::pair<std::string, size_t>> ranked(counts.begin(), counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (ranked.size() > max_categories) ranked.resize(max_categories);
    std::vector<std::string> kept;
    kept.reserve(ranked.size());
    for (const auto& [label, count] : ranked) kept.push_back(label);
    return kept;
}

}  // namespace

CategoryAssignment assign_categories(const std::vector<TripleSetExample>& examples,
                                     size_t max_categories) {
    std::vector<std::string> labels;
    labels.reserve(examples.size());
    for (const auto& ex : examples) labels.push_back(ex.category);
    CategoryAssignment out;
    out.categories = top_categories(labels, max_categories);
    std::unordered_map<std::string, bool> keep;
    for (const auto& c : out.categories) keep[c] = true;
    bool any_other = false;
    for (const auto& ex : examples) {
        const bool kept = keep.count(ex.category) > 0;
        out.by_example[ex.main_entity] = kept ? ex.category : "other";
        any_other = any_other || !kept;
    }
    if (any_other) out.categories.push_back("other");
    return out;
}

EvalReport evaluate(const std::vector<EvalItem>& items, size_t max_categories,
                    bool smooth) {
    EvalReport report;
    report.total = items.size();

    std::vector<const EvalItem*> kept;
    for (const auto& item : items) {
        if (item.complete)
            kept.push_back(&item);
        else
            ++report.excluded;
    }
    if (kept.empty()) return report;

    std::vector<TokenList> candidates;
    std::vector<TokenList> references;
    candidates.reserve(kept.size());
    references.reserve(kept.size());
    for (const auto* item : kept) {
        candidates.push_back(item->candidate);
        references.push_back(item->reference);
    }
    for (int n = 1; n <= 4; ++n)
        report.bleu_n[n - 1] = bleu(candidates, references, n, smooth);

    std::vector<std::string> labels;
    labels.reserve(kept.size());
    for (const auto* item : kept) labels.push_back(item->category);
    const std::vector<std::string> inventory = top_categories(labels, max_categories);
    std::unordered_map<std::string, bool> keep_label;
    for (const auto& c : inventory) keep_label[c] = true;

    std::map<std::string, std::vector<double>> by_category;
    double rouge_sum = 0;
    double meteor_sum = 0;
    for (const auto* item : kept) {
        PerExampleScores scores;
        scores.id = item->id;
        scores.bleu4 = item->reference.empty()
                           ? 0
                           : sentence_bleu(item->candidate, item->reference, 4, smooth);
        scores.rouge_l = item->reference.empty() ? 0 : rouge_l(item->candidate, item->reference);
        scores.meteor = meteor_exact(item->candidate, item->reference);
        scores.category = keep_label.count(item->category) > 0 ? item->category : "other";
        rouge_sum += scores.rouge_l;
        meteor_sum += scores.meteor;
        by_category[scores.category].push_back(scores.bleu4);
        report.per_example.push_back(std::move(scores));
    }
    report.rouge_l = rouge_sum / static_cast<double>(kept.size());
    report.meteor = meteor_sum / static_cast<double>(kept.size());
    for (auto& [category, scores] : by_category)
        report.category_bleu4[category] = five_number_summary(std::move(scores));
    return report;
}

std::string EvalReport::to_json_string() const {
    ordered_json j;
    j["total"] = total;
    j["excluded"] = excluded;
    j["excluded_pct"] =
        total == 0 ? 0.0 : 100.0 * static_cast<double>(excluded) / static_cast<double>(total);
    j["corpus"] = {{"bleu1", bleu_n[0]}, {"bleu2", bleu_n[1]}, {"bleu3", bleu_n[2]},
                   {"bleu4", bleu_n[3]}, {"rouge_l", rouge_l}, {"meteor", meteor}};
    auto per = ordered_json::array();
    for (const auto& s : per_example)
        per.push_back({{"id", s.id},
                       {"bleu4", s.bleu4},
                       {"rouge_l", s.rouge_l},
                       {"meteor", s.meteor},
                       {"category", s.category}});
    j["per_example"] = std::move(per);
    ordered_json cats = ordered_json::object();
    for (const auto& [category, f] : category_bleu4)
        cats[category] = {{"min", f.min}, {"q1", f.q1},   {"median", f.median},
                          {"q3", f.q3},   {"max", f.max}, {"n", f.n}};
    j["category_bleu4"] = std::move(cats);
    return j.dump();
}

std::string EvalReport::to_table() const {
    std::ostringstream out;
    char line[128];
    std::snprintf(line, sizeof(line), "%-8s %8s\n", "metric", "score");
    out << line;
    const char* names[6] = {"BLEU 1", "BLEU 2", "BLEU 3", "BLEU 4", "ROUGE_L", "METEOR"};
    const double values[6] = {bleu_n[0], bleu_n[1], bleu_n[2], bleu_n[3], rouge_l, meteor};
    for (int i = 0; i < 6; ++i) {
        std::snprintf(line, sizeof(line), "%-8s %8.2f\n", names[i], values[i] * 100.0);
        out << line;
    }
    std::snprintf(line, sizeof(line), "excluded %zu/%zu\n", excluded, total);
    out << line;
    return out.str();
}

}  // namespace kb2text
