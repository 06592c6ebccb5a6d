#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "jolt/serializer.hpp"

namespace jolt {

using TokenId = std::int32_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kBosId = 1;
inline constexpr TokenId kEosId = 2;
inline constexpr TokenId kMarkerId = 3;
inline constexpr TokenId kUnkId = 4;
inline constexpr std::size_t kDefaultMaxLen = 512;

/// A word-level token with its character range in the source text.
struct RawToken {
    std::string text;
    Span chars;
};

/// Splits text into tokens: the marker literal, quoted string literals
/// ('...' with '' escapes), numbers (digits with an optional fraction),
/// identifiers, the two-character operators <= >= <> != ||, and any other
/// non-space character on its own. An unterminated quote is a single-char token.
std::vector<RawToken> split_words(std::string_view text);

/// Token <-> id map with reserved specials PAD, BOS, EOS, MARKER, UNK.
class Vocab {
public:
    Vocab();

    /// Corpus tokens ordered by descending frequency, then lexicographically.
    static Vocab build(const std::vector<std::string>& texts);

    TokenId id(std::string_view token) const;
    const std::string& token(TokenId id) const;
    std::size_t size() const noexcept { return tokens_.size(); }

    nlohmann::json to_json() const;
    static Vocab from_json(const nlohmann::json& j);

private:
    void add(const std::string& token);

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> ids_;
};

struct TokenSequence {
    std::vector<TokenId> ids;
    /// Character range of each token in the source text (prefix + "\n" + schema + "\n" + query).
    std::vector<Span> char_offsets;
    /// Positional ids; 0..n-1 for a fresh encoding, preserved through pruning.
    std::vector<std::int32_t> positions;
    /// 1 + flat index of the column definition holding each token, 0 outside
    /// any definition. Preserved through pruning; empty reads as all 0.
    std::vector<std::int32_t> columns;

    std::size_t size() const noexcept { return ids.size(); }
};

enum class Segment : std::uint8_t { Prefix, Schema, Query };

struct ColumnTokens {
    std::string name;
    Span definition;
    std::size_t marker = 0;
};

struct TableTokens {
    std::string name;
    Span header;
    std::optional<Span> pk;
    std::vector<Span> fks;
    Span footer;
    std::vector<ColumnTokens> columns;
};

/// Per-position region membership plus token-level schema element spans.
struct SegmentMap {
    std::vector<Segment> segment;
    std::vector<std::uint8_t> marker;
    std::vector<std::uint8_t> gt_schema;
    std::vector<std::uint8_t> noisy_schema;
    std::vector<TableTokens> tables;

    std::size_t size() const noexcept { return segment.size(); }
    std::size_t column_count() const;
    /// Marker positions in column serialization order.
    std::vector<std::size_t> marker_positions() const;
    /// Contiguous range of the given segment (empty span at the end when absent).
    Span range(Segment s) const;
    /// (table index, column index) for a flat column index.
    std::pair<std::size_t, std::size_t> locate(std::size_t flat_column) const;

    /// Sets I_GT_Schema to these columns' definitions plus their tables' header/pk/fk/footer.
    void set_gt_columns(const std::vector<std::size_t>& flat_columns);
    /// Sets I_Noisy_Schema to these columns' definitions; tables not already in
    /// I_GT_Schema contribute their header/pk/fk/footer as well.
    void set_noisy_columns(const std::vector<std::size_t>& flat_columns);
};

struct Encoding {
    TokenSequence tokens;
    SegmentMap segments;
};

/// Tokenizes prefix, schema and query into one sequence. BOS opens the prefix;
/// EOS closes a non-empty query. Schema spans map to the minimal covering token
/// ranges; throws SpanMisaligned if a span boundary splits a token, and
/// SequenceTooLong beyond max_len.
Encoding encode(std::string_view prefix, const SerializedSchema& schema, std::string_view query, const Vocab& vocab,
                std::size_t max_len = kDefaultMaxLen);

/// Whitespace-joined tokens; specials render literally.
std::string decode(const std::vector<TokenId>& ids, const Vocab& vocab);

/// Joins prefix, schema and query as encode lays them out.
std::string joined_text(std::string_view prefix, std::string_view schema, std::string_view query);

}  // namespace jolt
