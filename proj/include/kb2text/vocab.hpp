#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "kb2text/matrix.hpp"

namespace kb2text {

enum class TokenKind { word, entity_surface_form, property_placeholder, special };

// One vocabulary entry. Canonical string forms:
//   word                   the word itself          "komunumo"
//   entity_surface_form    "[[Q490900, Floridia]]"  (entity id + one lexicalisation)
//   property_placeholder   "[[P17]]"
//   special                "<start>" "<end>" "<resource>" "<pad>" "<unk>"
struct Token {
    TokenKind kind = TokenKind::word;
    std::string text;         // word text, surface label, or special form
    std::string entity_id;    // entity_surface_form only
    std::string property_id;  // property_placeholder only

    static Token word(std::string w);
    static Token entity(std::string id, std::string label);
    static Token placeholder(std::string property_id);
    static Token special(std::string form);
    // Inverse of canonical(); unrecognised strings parse as plain words.
    static Token from_canonical(const std::string& s);

    std::string canonical() const;
    bool operator==(const Token& o) const { return canonical() == o.canonical(); }
};

using TokenSeq = std::vector<Token>;

TokenSeq to_tokens(const std::vector<std::string>& canonical_forms);
std::vector<std::string> to_canonical(const TokenSeq& tokens);

// Token inventory with fixed special slots. Immutable once built.
class Vocab {
public:
    // The five specials always occupy the first five indices, in this order.
    static constexpr int kStart = 0;
    static constexpr int kEnd = 1;
    static constexpr int kResource = 2;
    static constexpr int kPad = 3;
    static constexpr int kUnk = 4;
    static const std::vector<std::string>& special_forms();

    Vocab() = default;

    // summaries must already be vocabulary-extended. Keeps the top max_words
    // word / surface-form tokens by frequency (ties broken lexicographically
    // by canonical string) plus every property placeholder occurring at
    // least placeholder_min_count times. Placeholders have their own budget.
    static Vocab build(const std::vector<TokenSeq>& summaries, int max_words,
                       int placeholder_min_count);

    int size() const { return static_cast<int>(tokens_.size()); }
    const Token& token(int id) const;
    const std::vector<Token>& tokens() const { return tokens_; }

    // Known token -> its index, unknown -> <unk>.
    int encode_token(const Token& t) const;
    int lookup(const std::string& canonical) const;  // -1 when absent
    std::vector<int> encode(const TokenSeq& tokens) const;
    TokenSeq decode(const std::vector<int>& indices) const;

    int max_words() const { return max_words_; }
    int placeholder_min_count() const { return placeholder_min_count_; }
    int placeholder_count() const;

    std::string to_json_string() const;
    static Vocab from_json_string(const std::string& s);
    void save(const std::filesystem::path& path) const;
    static Vocab load(const std::filesystem::path& path);

    // FNV-1a over the serialised form; checkpoints store this to detect
    // vocab/model mismatches.
    uint64_t content_hash() const;

private:
    void add(Token t);

    std::vector<Token> tokens_;
    std::unordered_map<std::string, int> index_;
    int max_words_ = 0;
    int placeholder_min_count_ = 0;
};

// One-hot vector of the given length.
Vector one_hot(int index, int size);

uint64_t fnv1a(const std::string& bytes);

}  // namespace kb2text
