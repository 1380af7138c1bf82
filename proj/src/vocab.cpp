#include "kb2text/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "json.hpp"

#include "kb2text/io_util.hpp"

namespace kb2text {

using nlohmann::json;

Token Token::word(std::string w) {
    Token t;
    t.kind = TokenKind::word;
    t.text = std::move(w);
    return t;
}

Token Token::entity(std::string id, std::string label) {
    Token t;
    t.kind = TokenKind::entity_surface_form;
    t.entity_id = std::move(id);
    t.text = std::move(label);
    return t;
}

Token Token::placeholder(std::string property_id) {
    Token t;
    t.kind = TokenKind::property_placeholder;
    t.property_id = std::move(property_id);
    return t;
}

Token Token::special(std::string form) {
    Token t;
    t.kind = TokenKind::special;
    t.text = std::move(form);
    return t;
}

std::string Token::canonical() const {
    switch (kind) {
        case TokenKind::word:
        case TokenKind::special:
            return text;
        case TokenKind::entity_surface_form:
            return "[[" + entity_id + ", " + text + "]]";
        case TokenKind::property_placeholder:
            return "[[" + property_id + "]]";
    }
    return text;
}

namespace {

bool looks_like_id(const std::string& s, char prefix) {
    if (s.size() < 2 || s[0] != prefix) return false;
    for (size_t i = 1; i < s.size(); ++i) {
        if (s[i] < '0' || s[i] > '9') return false;
    }
    return true;
}

}  // namespace

Token Token::from_canonical(const std::string& s) {
    if (s.size() >= 5 && s.rfind("[[", 0) == 0 && s.compare(s.size() - 2, 2, "]]") == 0) {
        const std::string inner = s.substr(2, s.size() - 4);
        const size_t comma = inner.find(", ");
        if (comma == std::string::npos) {
            if (looks_like_id(inner, 'P')) return placeholder(inner);
            return word(s);
        }
        const std::string id = inner.substr(0, comma);
        if (looks_like_id(id, 'Q') || looks_like_id(id, 'P')) {
            return entity(id, inner.substr(comma + 2));
        }
        return word(s);
    }
    for (const auto& f : Vocab::special_forms()) {
        if (s == f) return special(s);
    }
    return word(s);
}

TokenSeq to_tokens(const std::vector<std::string>& canonical_forms) {
    TokenSeq out;
    out.reserve(canonical_forms.size());
    for (const auto& s : canonical_forms) out.push_back(Token::from_canonical(s));
    return out;
}

std::vector<std::string> to_canonical(const TokenSeq& tokens) {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(t.canonical());
    return out;
}

const std::vector<std::string>& Vocab::special_forms() {
    static const std::vector<std::string> forms = {"<start>", "<end>", "<resource>", "<pad>",
                                                   "<unk>"};
    return forms;
}

void Vocab::add(Token t) {
    const std::string key = t.canonical();
    if (index_.count(key)) throw ArgumentError("vocab: duplicate token " + key);
    index_[key] = static_cast<int>(tokens_.size());
    tokens_.push_back(std::move(t));
}

Vocab Vocab::build(const std::vector<TokenSeq>& summaries, int max_words,
                   int placeholder_min_count) {
    if (summaries.empty()) throw ArgumentError("build_vocab: empty corpus");
    if (max_words < 1) throw ArgumentError("build_vocab: max_words must be >= 1");
    if (placeholder_min_count < 1) {
        throw ArgumentError("build_vocab: placeholder_min_count must be >= 1");
    }

    // std::map keys give the lexicographic tie-break for free.
    std::map<std::string, std::pair<long, Token>> words;         // words + surface forms
    std::map<std::string, std::pair<long, Token>> placeholders;  // separate budget
    for (const auto& seq : summaries) {
        for (const auto& t : seq) {
            if (t.kind == TokenKind::special) continue;
            auto& table = t.kind == TokenKind::property_placeholder ? placeholders : words;
            auto [it, fresh] = table.try_emplace(t.canonical(), 0L, t);
            it->second.first += 1;
            (void)fresh;
        }
    }

    Vocab v;
    v.max_words_ = max_words;
    v.placeholder_min_count_ = placeholder_min_count;
    for (const auto& f : special_forms()) v.add(Token::special(f));

    std::vector<std::pair<std::string, std::pair<long, Token>>> ranked(words.begin(),
                                                                       words.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second.first != b.second.first) return a.second.first > b.second.first;
        return a.first < b.first;
    });
    const size_t keep = std::min(ranked.size(), static_cast<size_t>(max_words));
    for (size_t i = 0; i < keep; ++i) v.add(ranked[i].second.second);

    std::vector<std::pair<std::string, std::pair<long, Token>>> ph(placeholders.begin(),
                                                                   placeholders.end());
    std::stable_sort(ph.begin(), ph.end(), [](const auto& a, const auto& b) {
        if (a.second.first != b.second.first) return a.second.first > b.second.first;
        return a.first < b.first;
    });
    for (const auto& [key, entry] : ph) {
        if (entry.first >= placeholder_min_count) v.add(entry.second);
    }
    return v;
}

const Token& Vocab::token(int id) const {
    if (id < 0 || id >= size()) {
        throw BoundsError("vocab: index " + std::to_string(id) + " out of range [0, " +
                          std::to_string(size()) + ")");
    }
    return tokens_[static_cast<size_t>(id)];
}

int Vocab::encode_token(const Token& t) const {
    const auto it = index_.find(t.canonical());
    return it == index_.end() ? kUnk : it->second;
}

int Vocab::lookup(const std::string& canonical) const {
    const auto it = index_.find(canonical);
    return it == index_.end() ? -1 : it->second;
}

std::vector<int> Vocab::encode(const TokenSeq& tokens) const {
    std::vector<int> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(encode_token(t));
    return out;
}

TokenSeq Vocab::decode(const std::vector<int>& indices) const {
    TokenSeq out;
    out.reserve(indices.size());
    for (int id : indices) out.push_back(token(id));
    return out;
}

int Vocab::placeholder_count() const {
    int n = 0;
    for (const auto& t : tokens_) {
        if (t.kind == TokenKind::property_placeholder) ++n;
    }
    return n;
}

namespace {

const char* kind_tag(TokenKind k) {
    switch (k) {
        case TokenKind::word: return "word";
        case TokenKind::entity_surface_form: return "entity";
        case TokenKind::property_placeholder: return "placeholder";
        case TokenKind::special: return "special";
    }
    return "word";
}

TokenKind kind_from_tag(const std::string& s) {
    if (s == "word") return TokenKind::word;
    if (s == "entity") return TokenKind::entity_surface_form;
    if (s == "placeholder") return TokenKind::property_placeholder;
    if (s == "special") return TokenKind::special;
    throw FormatError("vocab: unknown token kind tag '" + s + "'");
}

}  // namespace

std::string Vocab::to_json_string() const {
    json tokens = json::array();
    for (const auto& t : tokens_) {
        json jt;
        jt["kind"] = kind_tag(t.kind);
        jt["text"] = t.text;
        if (!t.entity_id.empty()) jt["entity_id"] = t.entity_id;
        if (!t.property_id.empty()) jt["property_id"] = t.property_id;
        tokens.push_back(std::move(jt));
    }
    json j;
    j["format"] = "kb2text-vocab";
    j["version"] = 1;
    j["max_words"] = max_words_;
    j["placeholder_min_count"] = placeholder_min_count_;
    j["tokens"] = std::move(tokens);
    return j.dump();
}

Vocab Vocab::from_json_string(const std::string& s) {
    json j = json::parse(s);
    if (j.value("format", "") != "kb2text-vocab") {
        throw FormatError("vocab: not a kb2text vocab file");
    }
    Vocab v;
    v.max_words_ = j.value("max_words", 0);
    v.placeholder_min_count_ = j.value("placeholder_min_count", 0);
    for (const auto& jt : j.at("tokens")) {
        Token t;
        t.kind = kind_from_tag(jt.at("kind").get<std::string>());
        t.text = jt.value("text", "");
        t.entity_id = jt.value("entity_id", "");
        t.property_id = jt.value("property_id", "");
        v.add(std::move(t));
    }
    for (size_t i = 0; i < special_forms().size(); ++i) {
        if (v.tokens_.size() <= i || v.tokens_[i].canonical() != special_forms()[i]) {
            throw FormatError("vocab: special tokens missing or out of order");
        }
    }
    return v;
}

void Vocab::save(const std::filesystem::path& path) const {
    atomic_write_file(path, to_json_string() + "\n");
}

Vocab Vocab::load(const std::filesystem::path& path) {
    return from_json_string(read_file(path));
}

uint64_t Vocab::content_hash() const { return fnv1a(to_json_string()); }

Vector one_hot(int index, int size) {
    if (size <= 0) throw ArgumentError("one_hot: size must be positive");
    if (index < 0 || index >= size) {
        throw BoundsError("one_hot: index " + std::to_string(index) + " out of range [0, " +
                          std::to_string(size) + ")");
    }
    Vector v(static_cast<size_t>(size), real(0));
    v[static_cast<size_t>(index)] = real(1);
    return v;
}

uint64_t fnv1a(const std::string& bytes) {
    uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace kb2text
