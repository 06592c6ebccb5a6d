#include "jolt/schema.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <unordered_set>

#include "jolt/error.hpp"

namespace jolt {

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool iequals(std::string_view a, std::string_view b) noexcept {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(a[i])) != std::tolower(static_cast<unsigned char>(b[i]))) return false;
    }
    return true;
}

QualifiedColumn::QualifiedColumn(std::string_view t, std::string_view c) : table(to_lower(t)), column(to_lower(c)) {}

QualifiedColumn QualifiedColumn::parse(std::string_view text) {
    const auto dot = text.find('.');
    if (dot == std::string_view::npos || dot == 0 || dot + 1 == text.size()) {
        throw Error(ErrorCode::FormatError, "expected table.column, got '" + std::string(text) + "'");
    }
    return {text.substr(0, dot), text.substr(dot + 1)};
}

const Column* Table::find_column(std::string_view column) const {
    for (const auto& c : columns) {
        if (iequals(c.name, column)) return &c;
    }
    return nullptr;
}

const Table* SchemaDocument::find_table(std::string_view table) const {
    for (const auto& t : tables) {
        if (iequals(t.name, table)) return &t;
    }
    return nullptr;
}

std::size_t SchemaDocument::column_count() const {
    std::size_t n = 0;
    for (const auto& t : tables) n += t.columns.size();
    return n;
}

void SchemaDocument::validate() const {
    std::unordered_set<std::string> table_names;
    for (const auto& t : tables) {
        if (t.name.empty()) throw Error(ErrorCode::ConfigError, "table with empty name");
        if (!table_names.insert(to_lower(t.name)).second) throw Error(ErrorCode::ConfigError, "duplicate table " + t.name);
        std::unordered_set<std::string> column_names;
        for (const auto& c : t.columns) {
            if (c.name.empty()) throw Error(ErrorCode::ConfigError, "empty column name in " + t.name);
            if (!column_names.insert(to_lower(c.name)).second) {
                throw Error(ErrorCode::ConfigError, "duplicate column " + t.name + "." + c.name);
            }
            if (c.examples.size() > 2) throw Error(ErrorCode::ConfigError, "more than two examples for " + t.name + "." + c.name);
        }
        for (const auto& pk : t.primary_key) {
            if (!t.find_column(pk)) throw Error(ErrorCode::ConfigError, "primary key names missing column " + t.name + "." + pk);
        }
        for (const auto& fk : t.foreign_keys) {
            if (!t.find_column(fk.column)) throw Error(ErrorCode::ConfigError, "foreign key names missing column " + t.name + "." + fk.column);
        }
    }
    for (const auto& t : tables) {
        for (const auto& fk : t.foreign_keys) {
            const Table* ref = find_table(fk.ref_table);
            if (!ref || !ref->find_column(fk.ref_column)) {
                throw Error(ErrorCode::ConfigError, "foreign key references missing " + fk.ref_table + "." + fk.ref_column);
            }
        }
    }
}

SchemaDocument SchemaDocument::from_json(const nlohmann::json& j) {
    SchemaDocument doc;
    try {
        for (const auto& jt : j.at("tables")) {
            Table t;
            t.name = jt.at("name").get<std::string>();
            for (const auto& jc : jt.at("columns")) {
                Column c;
                c.name = jc.at("name").get<std::string>();
                c.sql_type = jc.at("type").get<std::string>();
                if (jc.contains("examples")) c.examples = jc.at("examples").get<std::vector<std::string>>();
                t.columns.push_back(std::move(c));
            }
            if (jt.contains("primary_key")) t.primary_key = jt.at("primary_key").get<std::vector<std::string>>();
            if (jt.contains("foreign_keys")) {
                for (const auto& jf : jt.at("foreign_keys")) {
                    if (!jf.is_array() || jf.size() != 3) throw Error(ErrorCode::ConfigError, "foreign key must be [local, table, column]");
                    t.foreign_keys.push_back({jf[0].get<std::string>(), jf[1].get<std::string>(), jf[2].get<std::string>()});
                }
            }
            doc.tables.push_back(std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ConfigError, std::string("schema json: ") + e.what());
    }
    doc.validate();
    return doc;
}

nlohmann::json SchemaDocument::to_json() const {
    nlohmann::json tables_json = nlohmann::json::array();
    for (const auto& t : tables) {
        nlohmann::json columns = nlohmann::json::array();
        for (const auto& c : t.columns) {
            nlohmann::json jc = {{"name", c.name}, {"type", c.sql_type}};
            if (!c.examples.empty()) jc["examples"] = c.examples;
            columns.push_back(std::move(jc));
        }
        nlohmann::json fks = nlohmann::json::array();
        for (const auto& fk : t.foreign_keys) fks.push_back({fk.column, fk.ref_table, fk.ref_column});
        tables_json.push_back({{"name", t.name}, {"columns", columns}, {"primary_key", t.primary_key}, {"foreign_keys", fks}});
    }
    return {{"tables", tables_json}};
}

SchemaDocument SchemaDocument::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ConfigError, path + ": " + e.what());
    }
    return from_json(j);
}

}  // namespace jolt
