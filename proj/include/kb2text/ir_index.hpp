#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "kb2text/corpus.hpp"
#include "kb2text/matrix.hpp"

namespace kb2text {

// TF-IDF + LSA nearest-neighbour retrieval over triple sets. Each example
// becomes a bag of identifier terms (subject, property, object of every
// triple), weighted tf * ln(N/df), then projected onto a rank-k SVD basis;
// queries are matched by cosine similarity (K = 1, ties to the lowest id).

struct IrConfig {
    int k = 128;               // LSA dimensions; must be <= min(#docs, #terms)
    int exact_svd_limit = 200; // exact Jacobi SVD when min(#docs, #terms) <= limit
    int power_iterations = 2;  // randomized scheme parameters
    int oversampling = 10;
    uint64_t seed = 1;
};

struct IrIndex {
    IrConfig cfg;
    std::vector<std::string> terms;  // column order of the tf-idf matrix
    std::unordered_map<std::string, int> term_ids;
    Vector idf;        // per term, ln(N/df)
    Matrix basis;      // terms x k right singular vectors
    Matrix projected;  // docs x k projected training vectors
    int fallback_doc = 0;  // most frequent training summary (ties: first occurrence)

    size_t n_docs() const { return projected.rows(); }
    size_t n_terms() const { return terms.size(); }

    void save(const std::filesystem::path& path) const;
    static IrIndex load(const std::filesystem::path& path);
};

// Bag of identifier terms for one triple set, in triple order.
std::vector<std::string> triple_terms(const std::vector<Triple>& triples);

IrIndex ir_build(const std::vector<TripleSetExample>& corpus, const IrConfig& cfg = {});

struct IrRetrieval {
    int doc = 0;
    double similarity = 0;
    bool fallback = false;  // no known query terms (or all weights zero)
};

IrRetrieval ir_retrieve(const IrIndex& index, const std::vector<Triple>& query);

// Thin SVD A ~ U diag(sigma) V^T with sigma descending; U is m x r, V is n x r
// for r = min(rank, min(m, n)).
struct SvdResult {
    Matrix u;
    Vector sigma;
    Matrix v;
};

// Exact one-sided Jacobi SVD (on the transpose when rows < cols).
SvdResult jacobi_svd(const Matrix& a, int rank);

// Randomized range-finder SVD with subspace power iterations.
SvdResult randomized_svd(const Matrix& a, int rank, int power_iterations, int oversampling,
                         uint64_t seed);

}  // namespace kb2text
