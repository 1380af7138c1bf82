#include "kb2text/kn_lm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "json.hpp"

#include "kb2text/beam.hpp"
#include "kb2text/binfile.hpp"
#include "kb2text/error.hpp"

namespace kb2text {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr char kMagic[8] = {'K', 'B', '2', 'T', 'K', 'N', 'L', 'M'};
constexpr uint32_t kFileVersion = 1;

std::string pack_ids(const uint32_t* ids, int n) {
    std::string key(static_cast<size_t>(n) * 4, '\0');
    for (int i = 0; i < n; ++i) std::memcpy(key.data() + 4 * i, &ids[i], 4);
    return key;
}

std::vector<std::string> strip_padding(const std::vector<std::string>& sentence) {
    size_t begin = 0;
    size_t end = sentence.size();
    while (begin < end && sentence[begin] == "<start>") ++begin;
    while (end > begin && sentence[end - 1] == "<end>") --end;
    return std::vector<std::string>(sentence.begin() + static_cast<long>(begin),
                                    sentence.begin() + static_cast<long>(end));
}

double estimate_discount(const std::unordered_map<std::string, uint64_t>& table,
                         double fallback) {
    uint64_t n1 = 0;
    uint64_t n2 = 0;
    for (const auto& [key, count] : table) {
        if (count == 1) ++n1;
        if (count == 2) ++n2;
    }
    if (n1 == 0 || n2 == 0) return fallback;
    return static_cast<double>(n1) / (static_cast<double>(n1) + 2.0 * static_cast<double>(n2));
}

}  // namespace

KnModel KnModel::train(const std::vector<std::vector<std::string>>& sentences,
                       const KnConfig& cfg) {
    if (cfg.order < 1) throw ArgumentError("kn train: order must be >= 1");
    if (sentences.empty()) throw ArgumentError("kn train: corpus is empty");

    KnModel m;
    m.cfg_ = cfg;
    m.vocab_ = {"<start>", "<end>", "<unk>"};
    for (size_t i = 0; i < m.vocab_.size(); ++i) m.token_ids_[m.vocab_[i]] = static_cast<int>(i);

    std::vector<std::vector<uint32_t>> encoded;
    encoded.reserve(sentences.size());
    for (const auto& raw : sentences) {
        const std::vector<std::string> sentence = strip_padding(raw);
        std::vector<uint32_t> ids;
        ids.reserve(sentence.size());
        for (const auto& tok : sentence) {
            auto it = m.token_ids_.find(tok);
            if (it == m.token_ids_.end()) {
                it = m.token_ids_.emplace(tok, static_cast<int>(m.vocab_.size())).first;
                m.vocab_.push_back(tok);
            }
            ids.push_back(static_cast<uint32_t>(it->second));
        }
        encoded.push_back(std::move(ids));
    }

    const int order = cfg.order;
    m.counts_.assign(static_cast<size_t>(order), CountMap{});
    for (const auto& ids : encoded) {
        std::vector<uint32_t> padded(static_cast<size_t>(order - 1), kStart);
        padded.insert(padded.end(), ids.begin(), ids.end());
        padded.push_back(kEnd);
        for (size_t i = 0; i + static_cast<size_t>(order) <= padded.size(); ++i)
            ++m.counts_[static_cast<size_t>(order - 1)][pack_ids(padded.data() + i, order)];
    }
    // Lower orders count distinct one-token left extensions (continuation counts).
    for (int k = order - 1; k >= 1; --k)
        for (const auto& [key, count] : m.counts_[static_cast<size_t>(k)])
            ++m.counts_[static_cast<size_t>(k - 1)][key.substr(4)];

    m.derive_stats();
    return m;
}

void KnModel::derive_stats() {
    const size_t order = static_cast<size_t>(cfg_.order);
    ctx_totals_.assign(order, CountMap{});
    ctx_types_.assign(order, CountMap{});
    discounts_.assign(order, 0.0);
    for (size_t i = 0; i < order; ++i) {
        for (const auto& [key, count] : counts_[i]) {
            const std::string prefix = key.substr(0, key.size() - 4);
            ctx_totals_[i][prefix] += count;
            ctx_types_[i][prefix] += 1;
        }
        discounts_[i] = estimate_discount(counts_[i], cfg_.fallback_discount);
    }
}

int KnModel::token_id(const std::string& token) const {
    auto it = token_ids_.find(token);
    return it == token_ids_.end() ? kUnk : it->second;
}

const std::string& KnModel::token(int id) const {
    if (id < 0 || id >= vocab_size()) throw BoundsError("kn token: id out of range");
    return vocab_[static_cast<size_t>(id)];
}

double KnModel::prob_rec(const uint32_t* ctx, int ctx_len, uint32_t w, int k) const {
    if (k == 0)
        return w == static_cast<uint32_t>(kStart)
                   ? 0.0
                   : 1.0 / static_cast<double>(vocab_.size() - 1);
    const std::string prefix = pack_ids(ctx, ctx_len);
    const auto& totals = ctx_totals_[static_cast<size_t>(k - 1)];
    const auto total_it = totals.find(prefix);
    if (total_it == totals.end())
        return prob_rec(ctx + (ctx_len > 0 ? 1 : 0), std::max(ctx_len - 1, 0), w, k - 1);
    const double denom = static_cast<double>(total_it->second);
    const auto& table = counts_[static_cast<size_t>(k - 1)];
    const auto count_it = table.find(prefix + pack_ids(&w, 1));
    const double c = count_it == table.end() ? 0.0 : static_cast<double>(count_it->second);
    const double types =
        static_cast<double>(ctx_types_[static_cast<size_t>(k - 1)].at(prefix));
    const double d = discounts_[static_cast<size_t>(k - 1)];
    const double lower =
        prob_rec(ctx + (ctx_len > 0 ? 1 : 0), std::max(ctx_len - 1, 0), w, k - 1);
    return std::max(c - d, 0.0) / denom + d * types / denom * lower;
}

namespace {

// Pads or truncates a history to exactly n ids, newest last.
std::vector<uint32_t> fixed_context(const std::vector<int>& context, int n) {
    std::vector<uint32_t> ctx(static_cast<size_t>(n), KnModel::kStart);
    const size_t take = std::min(context.size(), static_cast<size_t>(n));
    for (size_t i = 0; i < take; ++i) {
        const int id = context[context.size() - take + i];
        if (id < 0) throw BoundsError("kn prob: negative token id in context");
        ctx[static_cast<size_t>(n) - take + i] = static_cast<uint32_t>(id);
    }
    return ctx;
}

}  // namespace

double KnModel::prob(const std::vector<int>& context, int token) const {
    if (token < 0 || token >= vocab_size()) throw BoundsError("kn prob: token id out of range");
    const std::vector<uint32_t> ctx = fixed_context(context, cfg_.order - 1);
    return prob_rec(ctx.data(), cfg_.order - 1, static_cast<uint32_t>(token), cfg_.order);
}

Vector KnModel::next_log_probs(const std::vector<int>& context) const {
    const int order = cfg_.order;
    const std::vector<uint32_t> ctx = fixed_context(context, order - 1);

    struct Level {
        bool seen = false;
        double denom = 0;
        double types = 0;
        double discount = 0;
        std::string prefix;
    };
    std::vector<Level> levels(static_cast<size_t>(order));
    for (int k = 1; k <= order; ++k) {
        Level& level = levels[static_cast<size_t>(k - 1)];
        level.prefix = pack_ids(ctx.data() + (order - k), k - 1);
        const auto& totals = ctx_totals_[static_cast<size_t>(k - 1)];
        const auto it = totals.find(level.prefix);
        if (it == totals.end()) continue;
        level.seen = true;
        level.denom = static_cast<double>(it->second);
        level.types =
            static_cast<double>(ctx_types_[static_cast<size_t>(k - 1)].at(level.prefix));
        level.discount = discounts_[static_cast<size_t>(k - 1)];
    }

    Vector out(vocab_.size());
    for (int w = 0; w < vocab_size(); ++w) {
        if (w == kStart) {
            out[static_cast<size_t>(w)] = -std::numeric_limits<real>::infinity();
            continue;
        }
        const uint32_t wid = static_cast<uint32_t>(w);
        const std::string wkey = pack_ids(&wid, 1);
        double p = 1.0 / static_cast<double>(vocab_.size() - 1);
        for (int k = 1; k <= order; ++k) {
            const Level& level = levels[static_cast<size_t>(k - 1)];
            if (!level.seen) continue;
            const auto& table = counts_[static_cast<size_t>(k - 1)];
            const auto it = table.find(level.prefix + wkey);
            const double c = it == table.end() ? 0.0 : static_cast<double>(it->second);
            p = std::max(c - level.discount, 0.0) / level.denom +
                level.discount * level.types / level.denom * p;
        }
        out[static_cast<size_t>(w)] = static_cast<real>(std::log(p));
    }
    return out;
}

double KnModel::sequence_log_prob(const std::vector<std::string>& sentence) const {
    const std::vector<std::string> content = strip_padding(sentence);
    std::vector<int> context(static_cast<size_t>(std::max(cfg_.order - 1, 0)), kStart);
    double total = 0;
    auto advance = [&](int target) {
        total += std::log(prob(context, target));
        context.push_back(target);
    };
    for (const auto& tok : content) advance(token_id(tok));
    advance(kEnd);
    return total;
}

double KnModel::perplexity(const std::vector<std::vector<std::string>>& sentences) const {
    if (sentences.empty()) throw ArgumentError("kn perplexity: corpus is empty");
    double log_prob = 0;
    size_t tokens = 0;
    for (const auto& sentence : sentences) {
        log_prob += sequence_log_prob(sentence);
        tokens += strip_padding(sentence).size() + 1;
    }
    return std::exp(-log_prob / static_cast<double>(tokens));
}

void KnModel::save(const std::filesystem::path& path) const {
    ordered_json header;
    header["format"] = "kb2text-kn";
    header["order"] = cfg_.order;
    header["fallback_discount"] = cfg_.fallback_discount;
    header["discounts"] = discounts_;
    header["vocab"] = vocab_;
    auto sizes = ordered_json::array();
    for (const auto& table : counts_) sizes.push_back(table.size());
    header["table_sizes"] = std::move(sizes);

    std::string blobs;
    for (const auto& table : counts_) {
        std::vector<std::pair<std::string, uint64_t>> entries(table.begin(), table.end());
        std::sort(entries.begin(), entries.end());
        for (const auto& [key, count] : entries) {
            blobs += key;
            append_u64(blobs, count);
        }
    }
    write_framed_file(path, kMagic, kFileVersion, header.dump(), blobs);
}

KnModel KnModel::load(const std::filesystem::path& path) {
    const FramedFile file = read_framed_file(path, kMagic, kFileVersion, "kn model");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(file.header_json);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("kn model: invalid header JSON: ") + e.what());
    }

    KnModel m;
    try {
        if (header.at("format").get<std::string>() != "kb2text-kn")
            throw FormatError("kn model: unexpected format field");
        m.cfg_.order = header.at("order").get<int>();
        m.cfg_.fallback_discount = header.at("fallback_discount").get<double>();
        m.vocab_ = header.at("vocab").get<std::vector<std::string>>();
        if (m.cfg_.order < 1 || m.vocab_.size() < 3)
            throw FormatError("kn model: invalid header values");
        for (size_t i = 0; i < m.vocab_.size(); ++i)
            m.token_ids_[m.vocab_[i]] = static_cast<int>(i);

        const auto sizes = header.at("table_sizes").get<std::vector<uint64_t>>();
        if (sizes.size() != static_cast<size_t>(m.cfg_.order))
            throw FormatError("kn model: table manifest does not match order");
        BlobReader reader(file.data, file.blob_offset);
        m.counts_.assign(static_cast<size_t>(m.cfg_.order), CountMap{});
        for (size_t i = 0; i < sizes.size(); ++i) {
            const size_t key_bytes = (i + 1) * 4;
            for (uint64_t e = 0; e < sizes[i]; ++e) {
                std::string key(key_bytes, '\0');
                reader.read_bytes(key.data(), key_bytes);
                m.counts_[i][std::move(key)] = reader.read_u64();
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("kn model: ") + e.what());
    }
    m.derive_stats();
    return m;
}

KnGeneration kn_generate(const KnModel& model, int beam_size, int max_len,
                         bool prefer_complete) {
    KnScorer scorer{model};
    BeamConfig cfg;
    cfg.beam_size = beam_size;
    cfg.max_len = max_len;
    cfg.start_id = model.start_id();
    cfg.end_id = model.end_id();
    cfg.prefer_complete = prefer_complete;
    const BeamResult result = beam_search(scorer, cfg);

    KnGeneration out;
    out.log_prob = result.log_prob;
    out.complete = result.complete;
    size_t begin = 0;
    size_t end = result.tokens.size();
    if (begin < end && result.tokens[begin] == model.start_id()) ++begin;
    if (result.complete && end > begin && result.tokens[end - 1] == model.end_id()) --end;
    for (size_t i = begin; i < end; ++i) out.tokens.push_back(model.token(result.tokens[i]));
    return out;
}

}  // namespace kb2text
