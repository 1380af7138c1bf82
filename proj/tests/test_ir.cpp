#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "kb2text/ir_index.hpp"
#include "kb2text/rng.hpp"

using namespace kb2text;

namespace {

Triple make_triple(std::string s, std::string p, std::string o) {
    Triple t;
    t.subject_id = std::move(s);
    t.property_id = std::move(p);
    t.object_id = std::move(o);
    t.subject_label = t.subject_id;
    t.property_label = t.property_id;
    t.object_label = t.object_id;
    return t;
}

TripleSetExample make_doc(std::vector<Triple> triples, std::vector<std::string> summary) {
    TripleSetExample ex;
    ex.main_entity = triples.empty() ? "Q0" : triples.front().subject_id;
    ex.triples = std::move(triples);
    ex.raw_summary = std::move(summary);
    return ex;
}

Matrix random_matrix(size_t rows, size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    for (size_t i = 0; i < rows; ++i)
        for (size_t j = 0; j < cols; ++j) m(i, j) = rng.gaussian();
    return m;
}

double frobenius(const Matrix& m) {
    double s = 0;
    for (size_t i = 0; i < m.rows(); ++i)
        for (size_t j = 0; j < m.cols(); ++j) s += double(m(i, j)) * double(m(i, j));
    return std::sqrt(s);
}

Matrix reconstruct(const SvdResult& svd) {
    Matrix out(svd.u.rows(), svd.v.rows());
    for (size_t i = 0; i < out.rows(); ++i)
        for (size_t j = 0; j < out.cols(); ++j) {
            double s = 0;
            for (size_t k = 0; k < svd.sigma.size(); ++k)
                s += double(svd.u(i, k)) * double(svd.sigma[k]) * double(svd.v(j, k));
            out(i, j) = s;
        }
    return out;
}

// Columns orthonormal: max |M^T M - I| entry.
double orthonormality_defect(const Matrix& m) {
    double worst = 0;
    for (size_t a = 0; a < m.cols(); ++a)
        for (size_t b = 0; b < m.cols(); ++b) {
            double dp = 0;
            for (size_t i = 0; i < m.rows(); ++i) dp += double(m(i, a)) * double(m(i, b));
            worst = std::max(worst, std::abs(dp - (a == b ? 1.0 : 0.0)));
        }
    return worst;
}

// Independent oracle: cyclic Jacobi eigendecomposition of a symmetric matrix.
// Returns eigenvalues descending with matching eigenvector columns. Written
// as plain rotation loops, sharing no code with the library SVD.
void jacobi_eigen_sym(Matrix g, Vector& eigenvalues, Matrix& eigenvectors) {
    const size_t n = g.rows();
    REQUIRE(g.cols() == n);
    Matrix q(n, n);
    for (size_t i = 0; i < n; ++i) q(i, i) = 1;

    for (int sweep = 0; sweep < 200; ++sweep) {
        double off = 0;
        for (size_t p = 0; p < n; ++p)
            for (size_t r = p + 1; r < n; ++r) off += double(g(p, r)) * double(g(p, r));
        if (off < 1e-28) break;
        for (size_t p = 0; p < n; ++p) {
            for (size_t r = p + 1; r < n; ++r) {
                if (g(p, r) == 0) continue;
                const double theta = (double(g(r, r)) - double(g(p, p))) / (2.0 * double(g(p, r)));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (size_t j = 0; j < n; ++j) {
                    const double gp = g(p, j), gr = g(r, j);
                    g(p, j) = c * gp - s * gr;
                    g(r, j) = s * gp + c * gr;
                }
                for (size_t i = 0; i < n; ++i) {
                    const double gp = g(i, p), gr = g(i, r);
                    g(i, p) = c * gp - s * gr;
                    g(i, r) = s * gp + c * gr;
                    const double qp = q(i, p), qr = q(i, r);
                    q(i, p) = c * qp - s * qr;
                    q(i, r) = s * qp + c * qr;
                }
            }
        }
    }

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return g(a, a) > g(b, b); });
    eigenvalues.assign(n, 0);
    eigenvectors = Matrix(n, n);
    for (size_t k = 0; k < n; ++k) {
        eigenvalues[k] = g(order[k], order[k]);
        for (size_t i = 0; i < n; ++i) eigenvectors(i, k) = q(i, order[k]);
    }
}

}  // namespace

TEST_CASE("triple_terms lists subject, property, object of each triple in order") {
    std::vector<Triple> triples = {make_triple("Q1", "P17", "Q2"),
                                   make_triple("Q3", "P31", "Q1")};
    CHECK(triple_terms(triples) ==
          std::vector<std::string>{"Q1", "P17", "Q2", "Q3", "P31", "Q1"});
    CHECK(triple_terms({}).empty());
}

TEST_CASE("jacobi_svd factors random matrices exactly") {
    Rng rng(41);
    for (auto [rows, cols] : std::vector<std::pair<size_t, size_t>>{{7, 5}, {5, 9}, {6, 6}}) {
        Matrix a = random_matrix(rows, cols, rng);
        const size_t full = std::min(rows, cols);
        SvdResult svd = jacobi_svd(a, static_cast<int>(full));

        REQUIRE(svd.sigma.size() == full);
        REQUIRE(svd.u.rows() == rows);
        REQUIRE(svd.u.cols() == full);
        REQUIRE(svd.v.rows() == cols);
        REQUIRE(svd.v.cols() == full);
        for (size_t k = 0; k + 1 < full; ++k) CHECK(svd.sigma[k] >= svd.sigma[k + 1]);
        CHECK(svd.sigma.back() >= 0);
        CHECK(orthonormality_defect(svd.u) < 1e-9);
        CHECK(orthonormality_defect(svd.v) < 1e-9);

        Matrix rec = reconstruct(svd);
        double err = 0;
        for (size_t i = 0; i < rows; ++i)
            for (size_t j = 0; j < cols; ++j)
                err = std::max(err, std::abs(double(rec(i, j)) - double(a(i, j))));
        CHECK(err < 1e-9);
    }
}

TEST_CASE("jacobi_svd singular values match an independent eigensolver on A^T A") {
    Rng rng(42);
    Matrix a = random_matrix(9, 6, rng);
    Matrix gram(6, 6);
    for (size_t i = 0; i < 6; ++i)
        for (size_t j = 0; j < 6; ++j) {
            double s = 0;
            for (size_t r = 0; r < 9; ++r) s += double(a(r, i)) * double(a(r, j));
            gram(i, j) = s;
        }
    Vector eigenvalues;
    Matrix eigenvectors;
    jacobi_eigen_sym(gram, eigenvalues, eigenvectors);

    SvdResult svd = jacobi_svd(a, 6);
    REQUIRE(svd.sigma.size() == 6);
    for (size_t k = 0; k < 6; ++k)
        CHECK(double(svd.sigma[k]) ==
              doctest::Approx(std::sqrt(std::max(0.0, double(eigenvalues[k])))).epsilon(1e-8));
}

TEST_CASE("rank truncation keeps the leading singular triplets") {
    Rng rng(43);
    Matrix a = random_matrix(8, 6, rng);
    SvdResult full = jacobi_svd(a, 6);
    SvdResult truncated = jacobi_svd(a, 3);
    REQUIRE(truncated.sigma.size() == 3);
    for (size_t k = 0; k < 3; ++k)
        CHECK(double(truncated.sigma[k]) == doctest::Approx(double(full.sigma[k])).epsilon(1e-10));

    // Eckart-Young: the rank-3 reconstruction error equals the dropped tail.
    Matrix rec = reconstruct(truncated);
    double err2 = 0;
    for (size_t i = 0; i < a.rows(); ++i)
        for (size_t j = 0; j < a.cols(); ++j) {
            const double d = double(a(i, j)) - double(rec(i, j));
            err2 += d * d;
        }
    double tail = 0;
    for (size_t k = 3; k < 6; ++k) tail += double(full.sigma[k]) * double(full.sigma[k]);
    CHECK(std::sqrt(err2) == doctest::Approx(std::sqrt(tail)).epsilon(1e-8));
}

TEST_CASE("randomized_svd recovers an exactly low-rank matrix") {
    Rng rng(44);
    Matrix b = random_matrix(30, 5, rng);
    Matrix c = random_matrix(5, 12, rng);
    Matrix a = matmul(b, c);  // rank 5 by construction

    SvdResult exact = jacobi_svd(a, 5);
    SvdResult randomized = randomized_svd(a, 5, 2, 10, 7);
    REQUIRE(randomized.sigma.size() == 5);
    for (size_t k = 0; k < 5; ++k)
        CHECK(double(randomized.sigma[k]) ==
              doctest::Approx(double(exact.sigma[k])).epsilon(1e-8));
    CHECK(orthonormality_defect(randomized.u) < 1e-8);
    CHECK(orthonormality_defect(randomized.v) < 1e-8);

    Matrix rec = reconstruct(randomized);
    double err = 0;
    for (size_t i = 0; i < a.rows(); ++i)
        for (size_t j = 0; j < a.cols(); ++j)
            err = std::max(err, std::abs(double(rec(i, j)) - double(a(i, j))));
    CHECK(err < 1e-7 * frobenius(a));

    // Deterministic for a fixed seed.
    SvdResult again = randomized_svd(a, 5, 2, 10, 7);
    CHECK(randomized.sigma == again.sigma);
}

TEST_CASE("svd input validation") {
    Matrix a(3, 2);
    CHECK_THROWS_AS(jacobi_svd(a, 0), ArgumentError);
    CHECK_THROWS_AS(jacobi_svd(Matrix(), 1), ArgumentError);
    CHECK_THROWS_AS(randomized_svd(a, 0, 2, 10, 1), ArgumentError);
    CHECK_THROWS_AS(randomized_svd(Matrix(), 1, 2, 10, 1), ArgumentError);
}

TEST_CASE("LSA projection matches the independent eigensolver oracle") {
    // 10 documents x 8 identifier terms with varied counts.
    Rng rng(45);
    std::vector<std::string> pool;
    for (int t = 0; t < 8; ++t) pool.push_back("T" + std::to_string(t));
    std::vector<TripleSetExample> corpus;
    for (int d = 0; d < 10; ++d) {
        std::vector<Triple> triples;
        const int n = 2 + static_cast<int>(rng.uniform_int(2));
        for (int i = 0; i < n; ++i)
            triples.push_back(make_triple(pool[rng.uniform_int(8)], pool[rng.uniform_int(8)],
                                          pool[rng.uniform_int(8)]));
        corpus.push_back(make_doc(std::move(triples), {"doc", std::to_string(d)}));
    }

    IrConfig cfg;
    cfg.k = 4;
    IrIndex index = ir_build(corpus, cfg);
    REQUIRE(index.n_docs() == 10);
    REQUIRE(index.n_terms() == 8);

    // Rebuild the tf-idf matrix from scratch (same term order, independent
    // counting), then take the top-4 eigenvectors of A^T A as the LSA basis.
    const size_t n_docs = 10, n_terms = 8;
    std::vector<std::vector<double>> tf(n_docs, std::vector<double>(n_terms, 0));
    std::vector<int> df(n_terms, 0);
    for (size_t d = 0; d < n_docs; ++d) {
        for (const auto& term : triple_terms(corpus[d].triples))
            tf[d][static_cast<size_t>(index.term_ids.at(term))] += 1;
        for (size_t t = 0; t < n_terms; ++t)
            if (tf[d][t] > 0) ++df[t];
    }
    Matrix a(n_docs, n_terms);
    for (size_t d = 0; d < n_docs; ++d)
        for (size_t t = 0; t < n_terms; ++t) {
            const double idf = std::log(double(n_docs) / double(df[t]));
            a(d, t) = tf[d][t] * idf;
            CHECK(double(index.idf[t]) == doctest::Approx(idf).epsilon(1e-12));
        }

    Matrix gram(n_terms, n_terms);
    for (size_t i = 0; i < n_terms; ++i)
        for (size_t j = 0; j < n_terms; ++j) {
            double s = 0;
            for (size_t d = 0; d < n_docs; ++d) s += double(a(d, i)) * double(a(d, j));
            gram(i, j) = s;
        }
    Vector eigenvalues;
    Matrix eigenvectors;
    jacobi_eigen_sym(gram, eigenvalues, eigenvectors);
    REQUIRE(eigenvalues[3] - eigenvalues[4] > 1e-6);  // top-4 subspace well defined

    // P P^T = A Q_k Q_k^T A^T is basis-sign invariant, so it is directly
    // comparable between the library and the oracle.
    const size_t k = 4;
    Matrix aq(n_docs, k);
    for (size_t d = 0; d < n_docs; ++d)
        for (size_t c = 0; c < k; ++c) {
            double s = 0;
            for (size_t t = 0; t < n_terms; ++t) s += double(a(d, t)) * double(eigenvectors(t, c));
            aq(d, c) = s;
        }
    for (size_t d1 = 0; d1 < n_docs; ++d1)
        for (size_t d2 = 0; d2 < n_docs; ++d2) {
            double oracle = 0, lib = 0;
            for (size_t c = 0; c < k; ++c) {
                oracle += double(aq(d1, c)) * double(aq(d2, c));
                lib += double(index.projected(d1, c)) * double(index.projected(d2, c));
            }
            CHECK(lib == doctest::Approx(oracle).epsilon(1e-6));
        }
}

TEST_CASE("full-rank index retrieves every document from its own triples") {
    std::vector<TripleSetExample> corpus;
    for (int d = 0; d < 6; ++d) {
        const std::string q = "Q" + std::to_string(d + 1);
        std::vector<Triple> triples = {
            make_triple(q, "P31", "Q100"),
            make_triple(q, "P17", "Q" + std::to_string(200 + d)),
        };
        if (d % 2 == 0) triples.push_back(make_triple(q, "P36", "Q" + std::to_string(300 + d)));
        corpus.push_back(make_doc(std::move(triples), {"summary", std::to_string(d)}));
    }

    IrConfig cfg;
    cfg.k = 6;  // min(#docs, #terms) = 6: no information lost
    IrIndex index = ir_build(corpus, cfg);
    for (int d = 0; d < 6; ++d) {
        IrRetrieval r = ir_retrieve(index, corpus[static_cast<size_t>(d)].triples);
        CHECK(r.doc == d);
        CHECK_FALSE(r.fallback);
        CHECK(r.similarity > 0.999999);
    }
}

TEST_CASE("cosine similarity is invariant to duplicating the query") {
    std::vector<TripleSetExample> corpus;
    for (int d = 0; d < 4; ++d)
        corpus.push_back(make_doc({make_triple("Q" + std::to_string(d), "P1", "Q9"),
                                   make_triple("Q" + std::to_string(d), "P2", "Q8")},
                                  {"s", std::to_string(d)}));
    IrConfig cfg;
    cfg.k = 4;
    IrIndex index = ir_build(corpus, cfg);

    std::vector<Triple> once = corpus[2].triples;
    std::vector<Triple> twice = once;
    twice.insert(twice.end(), once.begin(), once.end());
    IrRetrieval r1 = ir_retrieve(index, once);
    IrRetrieval r2 = ir_retrieve(index, twice);
    CHECK(r1.doc == r2.doc);
    CHECK(r1.similarity == doctest::Approx(r2.similarity).epsilon(1e-12));
}

TEST_CASE("identical documents tie to the lowest document id") {
    std::vector<TripleSetExample> corpus;
    for (int d = 0; d < 5; ++d) {
        const std::string q = d == 3 ? "Q1" : "Q" + std::to_string(d);  // doc 3 repeats doc 1
        corpus.push_back(make_doc({make_triple(q, "P1", "Q9")}, {"s", q}));
    }
    corpus[3] = corpus[1];

    IrConfig cfg;
    cfg.k = 4;
    IrIndex index = ir_build(corpus, cfg);
    IrRetrieval r = ir_retrieve(index, corpus[1].triples);
    CHECK(r.doc == 1);
}

TEST_CASE("queries with no usable terms fall back to the modal summary") {
    std::vector<TripleSetExample> corpus = {
        make_doc({make_triple("Q1", "P1", "Q2")}, {"alpha"}),
        make_doc({make_triple("Q3", "P1", "Q4")}, {"beta"}),
        make_doc({make_triple("Q5", "P2", "Q6")}, {"beta"}),
        make_doc({make_triple("Q7", "P2", "Q8")}, {"gamma"}),
    };
    IrConfig cfg;
    cfg.k = 4;
    IrIndex index = ir_build(corpus, cfg);
    CHECK(index.fallback_doc == 1);  // "beta" appears twice, first at doc 1

    IrRetrieval unknown = ir_retrieve(index, {make_triple("QX", "PX", "QY")});
    CHECK(unknown.fallback);
    CHECK(unknown.doc == 1);
    CHECK(unknown.similarity == 0.0);

    CHECK_FALSE(ir_retrieve(index, corpus[0].triples).fallback);
    CHECK(ir_retrieve(index, {}).fallback);
}

TEST_CASE("terms in every document get zero idf and carry no signal") {
    std::vector<TripleSetExample> corpus;
    for (int d = 0; d < 4; ++d)
        corpus.push_back(make_doc({make_triple("COMMON", "P" + std::to_string(d), "COMMON")},
                                  {"s", std::to_string(d)}));
    IrConfig cfg;
    cfg.k = 4;
    IrIndex index = ir_build(corpus, cfg);
    CHECK(double(index.idf[static_cast<size_t>(index.term_ids.at("COMMON"))]) == 0.0);

    // A query made only of zero-idf terms has zero weight: fallback.
    IrRetrieval r = ir_retrieve(index, {make_triple("COMMON", "COMMON", "COMMON")});
    CHECK(r.fallback);
}

TEST_CASE("ir_build validates its inputs") {
    std::vector<TripleSetExample> corpus = {
        make_doc({make_triple("Q1", "P1", "Q2")}, {"a"}),
        make_doc({make_triple("Q3", "P2", "Q4")}, {"b"}),
    };
    CHECK_THROWS_AS(ir_build({}, IrConfig{}), ArgumentError);

    IrConfig bad;
    bad.k = 0;
    CHECK_THROWS_AS(ir_build(corpus, bad), ArgumentError);
    bad.k = 3;  // > min(2 docs, 6 terms)
    CHECK_THROWS_AS(ir_build(corpus, bad), ArgumentError);

    std::vector<TripleSetExample> no_triples = {make_doc({}, {"a"}), make_doc({}, {"b"})};
    CHECK_THROWS_AS(ir_build(no_triples, IrConfig{}), ArgumentError);
}

TEST_CASE("save and load round trip preserves the index and its retrievals") {
    Rng rng(46);
    std::vector<TripleSetExample> corpus;
    for (int d = 0; d < 8; ++d) {
        std::vector<Triple> triples;
        for (int i = 0; i < 2; ++i)
            triples.push_back(make_triple("Q" + std::to_string(rng.uniform_int(10)),
                                          "P" + std::to_string(rng.uniform_int(4)),
                                          "Q" + std::to_string(rng.uniform_int(10))));
        corpus.push_back(make_doc(std::move(triples), {"s", std::to_string(d)}));
    }
    IrConfig cfg;
    cfg.k = 5;
    IrIndex index = ir_build(corpus, cfg);

    const auto path = std::filesystem::temp_directory_path() / "kb2text_test_ir.bin";
    index.save(path);
    IrIndex loaded = IrIndex::load(path);
    std::filesystem::remove(path);

    CHECK(loaded.cfg.k == index.cfg.k);
    CHECK(loaded.terms == index.terms);
    CHECK(loaded.idf == index.idf);
    CHECK(loaded.fallback_doc == index.fallback_doc);
    REQUIRE(loaded.basis.rows() == index.basis.rows());
    REQUIRE(loaded.projected.rows() == index.projected.rows());
    for (size_t i = 0; i < index.basis.rows(); ++i)
        for (size_t j = 0; j < index.basis.cols(); ++j)
            CHECK(loaded.basis(i, j) == index.basis(i, j));
    for (size_t i = 0; i < index.projected.rows(); ++i)
        for (size_t j = 0; j < index.projected.cols(); ++j)
            CHECK(loaded.projected(i, j) == index.projected(i, j));

    for (const auto& doc : corpus) {
        IrRetrieval a = ir_retrieve(index, doc.triples);
        IrRetrieval b = ir_retrieve(loaded, doc.triples);
        CHECK(a.doc == b.doc);
        CHECK(a.similarity == b.similarity);
        CHECK(a.fallback == b.fallback);
    }

    CHECK_THROWS_AS(IrIndex::load(std::filesystem::temp_directory_path() / "kb2text_absent.bin"),
                    IoError);
}
