#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "jolt/schema.hpp"

namespace jolt {

class Database;

/// Reserved literal placed after every column definition.
inline constexpr std::string_view kMarkerText = "<|marker|>";

/// Half-open range [begin, end) over characters or tokens.
struct Span {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const noexcept { return end - begin; }
    bool empty() const noexcept { return begin == end; }
    bool contains(std::size_t i) const noexcept { return i >= begin && i < end; }
    bool operator==(const Span&) const = default;
};

struct ColumnSpan {
    std::string name;
    /// Whole column line from its name through the marker.
    Span definition;
    Span marker;
};

struct TableSpans {
    std::string name;
    Span header;
    std::optional<Span> pk;
    std::vector<Span> fks;
    Span footer;
    std::vector<ColumnSpan> columns;
};

/// Locations of every schema element in a serialized schema.
struct SpanIndex {
    std::vector<TableSpans> tables;

    std::size_t column_count() const;
    /// {table: {header, pk, fk: [...], footer, columns: {name: {definition, marker}}}}
    nlohmann::ordered_json to_json() const;
    static SpanIndex from_json(const nlohmann::ordered_json& j);
};

struct SerializedSchema {
    std::string text;
    SpanIndex spans;
};

/// Renders the schema as DDL, one block per table:
///
///     CREATE TABLE singer (
///       singer_id INTEGER, -- examples: 1, 2 <|marker|>
///       name TEXT, -- examples: 'Joe', 'Ann' <|marker|>
///       PRIMARY KEY (singer_id),
///       FOREIGN KEY (x) REFERENCES t (y)
///     );
///
/// Blocks are separated by a blank line. Columns without examples render
/// `-- examples: None`.
SerializedSchema serialize_schema(const SchemaDocument& doc, std::string_view marker_text = kMarkerText);

/// Up to `limit` distinct non-null values of table.column in first-seen (rowid) order, rendered as SQL literals.
std::vector<std::string> sample_value_examples(const Database& db, const std::string& table, const std::string& column,
                                               std::size_t limit = 2);

/// Fills every column's examples from the database.
void attach_examples(SchemaDocument& doc, const Database& db);

/// One 0/1 label per column in serialization order. Throws UnknownColumn for links outside the schema.
std::vector<int> label_vector(const LinkSet& links, const SchemaDocument& doc);

}  // namespace jolt
