#pragma once

#include <compare>
#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace jolt {

struct Column {
    std::string name;
    std::string sql_type;
    /// Rendered SQL literals, at most two.
    std::vector<std::string> examples;
};

struct ForeignKey {
    std::string column;
    std::string ref_table;
    std::string ref_column;
};

struct Table {
    std::string name;
    std::vector<Column> columns;
    std::vector<std::string> primary_key;
    std::vector<ForeignKey> foreign_keys;

    /// Case-insensitive lookup; nullptr when absent.
    const Column* find_column(std::string_view column) const;
};

/// Database schema as tables of typed columns with key metadata.
struct SchemaDocument {
    std::vector<Table> tables;

    const Table* find_table(std::string_view table) const;
    std::size_t column_count() const;

    /// Throws ConfigError on duplicate names, bad key references or more than two examples.
    void validate() const;

    static SchemaDocument from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    static SchemaDocument load(const std::string& path);
};

/// A (table, column) pair, lowercase-normalized.
struct QualifiedColumn {
    std::string table;
    std::string column;

    QualifiedColumn() = default;
    QualifiedColumn(std::string_view t, std::string_view c);

    std::string str() const { return table + "." + column; }
    /// Parses "table.column".
    static QualifiedColumn parse(std::string_view text);

    auto operator<=>(const QualifiedColumn&) const = default;
};

using LinkSet = std::set<QualifiedColumn>;

std::string to_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b) noexcept;

}  // namespace jolt
