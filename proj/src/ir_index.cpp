#include "kb2text/ir_index.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

#include "kb2text/binfile.hpp"
#include "kb2text/error.hpp"
#include "kb2text/rng.hpp"

namespace kb2text {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr char kMagic[8] = {'K', 'B', '2', 'T', 'I', 'R', 'I', 'X'};
constexpr uint32_t kFileVersion = 1;

// Orthogonalizes the columns of `a` in place with plane rotations, accumulating
// them into an identity-initialized V, so a_in = Q diag(col norms) V^T.
void one_sided_jacobi(Matrix& a, Matrix& v) {
    const size_t n = a.cols();
    v = Matrix(n, n);
    for (size_t i = 0; i < n; ++i) v(i, i) = 1;
    const double tol = 1e-14;
    const int max_sweeps = 60;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (size_t i = 0; i + 1 < n; ++i) {
            for (size_t j = i + 1; j < n; ++j) {
                double alpha = 0, beta = 0, gamma = 0;
                for (size_t r = 0; r < a.rows(); ++r) {
                    const double x = a(r, i);
                    const double y = a(r, j);
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if (alpha == 0 || beta == 0) continue;
                if (std::fabs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t =
                    (zeta >= 0 ? 1.0 : -1.0) / (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (size_t r = 0; r < a.rows(); ++r) {
                    const double x = a(r, i);
                    const double y = a(r, j);
                    a(r, i) = c * x - s * y;
                    a(r, j) = s * x + c * y;
                }
                for (size_t r = 0; r < n; ++r) {
                    const double x = v(r, i);
                    const double y = v(r, j);
                    v(r, i) = c * x - s * y;
                    v(r, j) = s * x + c * y;
                }
            }
        }
        if (!rotated) break;
    }
}

// Full thin SVD of a matrix with rows >= cols via one-sided Jacobi.
SvdResult jacobi_svd_tall(const Matrix& a) {
    Matrix work = a;
    Matrix v;
    one_sided_jacobi(work, v);
    const size_t n = a.cols();

    std::vector<double> norms(n);
    for (size_t j = 0; j < n; ++j) {
        double sq = 0;
        for (size_t r = 0; r < work.rows(); ++r) sq += work(r, j) * work(r, j);
        norms[j] = std::sqrt(sq);
    }
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t x, size_t y) { return norms[x] > norms[y]; });

    SvdResult out;
    out.u = Matrix(work.rows(), n);
    out.v = Matrix(n, n);
    out.sigma.assign(n, 0);
    for (size_t jj = 0; jj < n; ++jj) {
        const size_t j = order[jj];
        out.sigma[jj] = static_cast<real>(norms[j]);
        if (norms[j] > 0)
            for (size_t r = 0; r < work.rows(); ++r)
                out.u(r, jj) = static_cast<real>(work(r, j) / norms[j]);
        for (size_t r = 0; r < n; ++r) out.v(r, jj) = v(r, j);
    }
    return out;
}

Matrix take_cols(const Matrix& m, size_t k) {
    Matrix out(m.rows(), k);
    for (size_t r = 0; r < m.rows(); ++r)
        for (size_t c = 0; c < k; ++c) out(r, c) = m(r, c);
    return out;
}

SvdResult truncate_svd(SvdResult full, size_t k) {
    SvdResult out;
    out.u = take_cols(full.u, k);
    out.v = take_cols(full.v, k);
    out.sigma.assign(full.sigma.begin(), full.sigma.begin() + static_cast<long>(k));
    return out;
}

// Modified Gram-Schmidt with re-orthogonalization; rank-deficient columns
// become zero columns.
void orthonormalize_columns(Matrix& m) {
    const size_t rows = m.rows();
    const size_t cols = m.cols();
    for (size_t j = 0; j < cols; ++j) {
        double initial = 0;
        for (size_t r = 0; r < rows; ++r) initial += m(r, j) * m(r, j);
        initial = std::sqrt(initial);
        for (int pass = 0; pass < 2; ++pass) {
            for (size_t i = 0; i < j; ++i) {
                double proj = 0;
                for (size_t r = 0; r < rows; ++r) proj += m(r, i) * m(r, j);
                for (size_t r = 0; r < rows; ++r) m(r, j) -= proj * m(r, i);
            }
        }
        double nrm = 0;
        for (size_t r = 0; r < rows; ++r) nrm += m(r, j) * m(r, j);
        nrm = std::sqrt(nrm);
        if (initial == 0 || nrm <= 1e-12 * initial) {
            for (size_t r = 0; r < rows; ++r) m(r, j) = 0;
        } else {
            for (size_t r = 0; r < rows; ++r) m(r, j) /= nrm;
        }
    }
}

}  // namespace

SvdResult jacobi_svd(const Matrix& a, int rank) {
    if (a.rows() == 0 || a.cols() == 0) throw ArgumentError("jacobi_svd: empty matrix");
    const size_t min_dim = std::min(a.rows(), a.cols());
    if (rank < 1) throw ArgumentError("jacobi_svd: rank must be >= 1");
    const size_t k = std::min(static_cast<size_t>(rank), min_dim);
    if (a.rows() >= a.cols()) return truncate_svd(jacobi_svd_tall(a), k);
    // a = (u' s v'^T)^T of the transpose: swap the factors.
    SvdResult t = jacobi_svd_tall(transpose(a));
    SvdResult out;
    out.u = t.v;
    out.v = t.u;
    out.sigma = t.sigma;
    return truncate_svd(std::move(out), k);
}

SvdResult randomized_svd(const Matrix& a, int rank, int power_iterations, int oversampling,
                         uint64_t seed) {
    if (a.rows() == 0 || a.cols() == 0) throw ArgumentError("randomized_svd: empty matrix");
    if (rank < 1) throw ArgumentError("randomized_svd: rank must be >= 1");
    const size_t min_dim = std::min(a.rows(), a.cols());
    const size_t k = std::min(static_cast<size_t>(rank), min_dim);
    const size_t sketch =
        std::min(static_cast<size_t>(rank + std::max(oversampling, 0)), min_dim);

    Rng rng(seed);
    Matrix omega(a.cols(), sketch);
    for (size_t i = 0; i < omega.size(); ++i) omega.data()[i] = static_cast<real>(rng.gaussian());

    Matrix q = matmul(a, omega);  // docs x sketch
    orthonormalize_columns(q);
    const Matrix at = transpose(a);
    for (int it = 0; it < power_iterations; ++it) {
        Matrix z = matmul(at, q);  // terms x sketch
        orthonormalize_columns(z);
        q = matmul(a, z);
        orthonormalize_columns(q);
    }

    const Matrix b = matmul(transpose(q), a);  // sketch x terms
    SvdResult small = jacobi_svd(b, static_cast<int>(k));
    SvdResult out;
    out.u = matmul(q, small.u);
    out.sigma = std::move(small.sigma);
    out.v = std::move(small.v);
    return out;
}

std::vector<std::string> triple_terms(const std::vector<Triple>& triples) {
    std::vector<std::string> terms;
    terms.reserve(triples.size() * 3);
    for (const auto& t : triples) {
        terms.push_back(t.subject_id);
        terms.push_back(t.property_id);
        terms.push_back(t.object_id);
    }
    return terms;
}

namespace {

std::string raw_summary_text(const TripleSetExample& ex) {
    std::string out;
    for (size_t i = 0; i < ex.raw_summary.size(); ++i) {
        if (i) out += ' ';
        out += ex.raw_summary[i];
    }
    return out;
}

}  // namespace

IrIndex ir_build(const std::vector<TripleSetExample>& corpus, const IrConfig& cfg) {
    if (corpus.empty()) throw ArgumentError("ir build: corpus is empty");
    if (cfg.k < 1) throw ArgumentError("ir build: k must be >= 1");

    IrIndex index;
    index.cfg = cfg;

    // Term vocabulary in first-occurrence order, plus document frequencies.
    std::vector<std::unordered_map<int, double>> doc_tf(corpus.size());
    std::vector<size_t> df;
    for (size_t d = 0; d < corpus.size(); ++d) {
        for (const auto& term : triple_terms(corpus[d].triples)) {
            auto it = index.term_ids.find(term);
            if (it == index.term_ids.end()) {
                it = index.term_ids.emplace(term, static_cast<int>(index.terms.size())).first;
                index.terms.push_back(term);
                df.push_back(0);
            }
            auto& cell = doc_tf[d][it->second];
            if (cell == 0) ++df[static_cast<size_t>(it->second)];
            cell += 1;
        }
    }
    if (index.terms.empty()) throw ArgumentError("ir build: corpus has no triples");

    const size_t n_docs = corpus.size();
    const size_t n_terms = index.terms.size();
    if (static_cast<size_t>(cfg.k) > std::min(n_docs, n_terms))
        throw ArgumentError("ir build: k exceeds min(#docs, #terms)");

    index.idf.assign(n_terms, 0);
    for (size_t t = 0; t < n_terms; ++t)
        index.idf[t] = static_cast<real>(
            std::log(static_cast<double>(n_docs) / static_cast<double>(df[t])));

    Matrix a(n_docs, n_terms);
    for (size_t d = 0; d < n_docs; ++d)
        for (const auto& [term, tf] : doc_tf[d])
            a(d, static_cast<size_t>(term)) = static_cast<real>(tf) * index.idf[static_cast<size_t>(term)];

    const SvdResult svd =
        std::min(n_docs, n_terms) <= static_cast<size_t>(cfg.exact_svd_limit)
            ? jacobi_svd(a, cfg.k)
            : randomized_svd(a, cfg.k, cfg.power_iterations, cfg.oversampling, cfg.seed);
    index.basis = svd.v;               // terms x k
    index.projected = matmul(a, svd.v);  // docs x k

    // Most frequent training summary; ties break to the earliest example.
    std::unordered_map<std::string, std::pair<size_t, size_t>> freq;  // text -> {count, first}
    for (size_t d = 0; d < n_docs; ++d) {
        auto [it, inserted] = freq.try_emplace(raw_summary_text(corpus[d]), 0, d);
        ++it->second.first;
    }
    size_t best_count = 0;
    size_t best_first = 0;
    for (const auto& [text, stat] : freq) {
        if (stat.first > best_count ||
            (stat.first == best_count && stat.second < best_first)) {
            best_count = stat.first;
            best_first = stat.second;
        }
    }
    index.fallback_doc = static_cast<int>(best_first);
    return index;
}

IrRetrieval ir_retrieve(const IrIndex& index, const std::vector<Triple>& query) {
    if (index.projected.rows() == 0) throw ArgumentError("ir retrieve: empty index");

    std::unordered_map<int, double> tf;
    for (const auto& term : triple_terms(query)) {
        const auto it = index.term_ids.find(term);
        if (it != index.term_ids.end()) tf[it->second] += 1;
    }
    Vector weighted(index.n_terms(), 0);
    double weight_norm = 0;
    for (const auto& [term, count] : tf) {
        const double w = count * static_cast<double>(index.idf[static_cast<size_t>(term)]);
        weighted[static_cast<size_t>(term)] = static_cast<real>(w);
        weight_norm += w * w;
    }
    if (weight_norm == 0) return {index.fallback_doc, 0.0, true};

    // Project: basis^T * weighted.
    Vector projected = matvec_transposed(index.basis, weighted);
    const double qn = norm(projected);

    IrRetrieval best{0, -2.0, false};
    for (size_t d = 0; d < index.projected.rows(); ++d) {
        double dp = 0, dn = 0;
        for (size_t c = 0; c < index.projected.cols(); ++c) {
            const double x = index.projected(d, c);
            dp += x * static_cast<double>(projected[c]);
            dn += x * x;
        }
        const double denom = qn * std::sqrt(dn);
        const double sim = denom == 0 ? 0.0 : dp / denom;
        if (sim > best.similarity) {
            best.doc = static_cast<int>(d);
            best.similarity = sim;
        }
    }
    return best;
}

void IrIndex::save(const std::filesystem::path& path) const {
    ordered_json header;
    header["format"] = "kb2text-ir";
    header["k"] = cfg.k;
    header["exact_svd_limit"] = cfg.exact_svd_limit;
    header["power_iterations"] = cfg.power_iterations;
    header["oversampling"] = cfg.oversampling;
    header["seed"] = std::to_string(cfg.seed);
    header["n_docs"] = projected.rows();
    header["basis_k"] = basis.cols();
    header["terms"] = terms;
    header["fallback_doc"] = fallback_doc;

    std::string blobs;
    append_vector(blobs, idf);
    append_matrix(blobs, basis);
    append_matrix(blobs, projected);
    write_framed_file(path, kMagic, kFileVersion, header.dump(), blobs);
}

IrIndex IrIndex::load(const std::filesystem::path& path) {
    const FramedFile file = read_framed_file(path, kMagic, kFileVersion, "ir index");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(file.header_json);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("ir index: invalid header JSON: ") + e.what());
    }

    IrIndex index;
    try {
        if (header.at("format").get<std::string>() != "kb2text-ir")
            throw FormatError("ir index: unexpected format field");
        index.cfg.k = header.at("k").get<int>();
        index.cfg.exact_svd_limit = header.at("exact_svd_limit").get<int>();
        index.cfg.power_iterations = header.at("power_iterations").get<int>();
        index.cfg.oversampling = header.at("oversampling").get<int>();
        index.cfg.seed = std::stoull(header.at("seed").get<std::string>());
        index.terms = header.at("terms").get<std::vector<std::string>>();
        index.fallback_doc = header.at("fallback_doc").get<int>();
        const size_t n_docs = header.at("n_docs").get<size_t>();
        const size_t basis_k = header.at("basis_k").get<size_t>();

        for (size_t i = 0; i < index.terms.size(); ++i)
            index.term_ids[index.terms[i]] = static_cast<int>(i);
        index.idf.assign(index.terms.size(), 0);
        index.basis = Matrix(index.terms.size(), basis_k);
        index.projected = Matrix(n_docs, basis_k);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("ir index: ") + e.what());
    }
    BlobReader reader(file.data, file.blob_offset);
    reader.read_vector(index.idf);
    reader.read_matrix(index.basis);
    reader.read_matrix(index.projected);
    return index;
}

}  // namespace kb2text
