#include "jolt/serializer.hpp"

#include <algorithm>

#include "jolt/db.hpp"
#include "jolt/error.hpp"

namespace jolt {

std::size_t SpanIndex::column_count() const {
    std::size_t n = 0;
    for (const auto& t : tables) n += t.columns.size();
    return n;
}

namespace {

nlohmann::ordered_json span_json(const Span& s) { return nlohmann::ordered_json::array({s.begin, s.end}); }

Span span_from(const nlohmann::ordered_json& j) {
    if (!j.is_array() || j.size() != 2) throw Error(ErrorCode::FormatError, "span must be [begin, end]");
    Span s{j[0].get<std::size_t>(), j[1].get<std::size_t>()};
    if (s.end < s.begin) throw Error(ErrorCode::FormatError, "span end before begin");
    return s;
}

class Writer {
public:
    Span append(std::string_view s) {
        const Span span{text.size(), text.size() + s.size()};
        text += s;
        return span;
    }
    void raw(std::string_view s) { text += s; }

    std::string text;
};

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

}  // namespace

nlohmann::ordered_json SpanIndex::to_json() const {
    nlohmann::ordered_json out = nlohmann::ordered_json::object();
    for (const auto& t : tables) {
        nlohmann::ordered_json jt;
        jt["header"] = span_json(t.header);
        jt["pk"] = t.pk ? span_json(*t.pk) : nlohmann::ordered_json(nullptr);
        jt["fk"] = nlohmann::ordered_json::array();
        for (const auto& fk : t.fks) jt["fk"].push_back(span_json(fk));
        jt["footer"] = span_json(t.footer);
        nlohmann::ordered_json cols = nlohmann::ordered_json::object();
        for (const auto& c : t.columns) cols[c.name] = {{"definition", span_json(c.definition)}, {"marker", span_json(c.marker)}};
        jt["columns"] = std::move(cols);
        out[t.name] = std::move(jt);
    }
    return out;
}

SpanIndex SpanIndex::from_json(const nlohmann::ordered_json& j) {
    SpanIndex idx;
    try {
        for (const auto& [name, jt] : j.items()) {
            TableSpans t;
            t.name = name;
            t.header = span_from(jt.at("header"));
            if (jt.contains("pk") && !jt.at("pk").is_null()) t.pk = span_from(jt.at("pk"));
            for (const auto& fk : jt.at("fk")) t.fks.push_back(span_from(fk));
            t.footer = span_from(jt.at("footer"));
            for (const auto& [cname, jc] : jt.at("columns").items()) {
                t.columns.push_back({cname, span_from(jc.at("definition")), span_from(jc.at("marker"))});
            }
            idx.tables.push_back(std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::FormatError, std::string("span index: ") + e.what());
    }
    return idx;
}

SerializedSchema serialize_schema(const SchemaDocument& doc, std::string_view marker_text) {
    Writer w;
    SpanIndex idx;
    for (std::size_t ti = 0; ti < doc.tables.size(); ++ti) {
        const Table& table = doc.tables[ti];
        if (ti) w.raw("\n\n");
        TableSpans ts;
        ts.name = table.name;
        ts.header = w.append("CREATE TABLE " + table.name + " (");
        for (const auto& col : table.columns) {
            w.raw("\n  ");
            std::string line = col.name + " " + col.sql_type + ", -- examples: ";
            line += col.examples.empty() ? std::string("None") : join(col.examples, ", ");
            line += " ";
            const Span head = w.append(line);
            const Span marker = w.append(marker_text);
            ts.columns.push_back({col.name, {head.begin, marker.end}, marker});
        }
        const bool has_pk = !table.primary_key.empty();
        if (has_pk) {
            w.raw("\n  ");
            std::string pk = "PRIMARY KEY (" + join(table.primary_key, ", ") + ")";
            ts.pk = w.append(pk);
            if (!table.foreign_keys.empty()) w.raw(",");
        }
        for (std::size_t fi = 0; fi < table.foreign_keys.size(); ++fi) {
            const auto& fk = table.foreign_keys[fi];
            w.raw("\n  ");
            ts.fks.push_back(w.append("FOREIGN KEY (" + fk.column + ") REFERENCES " + fk.ref_table + " (" + fk.ref_column + ")"));
            if (fi + 1 < table.foreign_keys.size()) w.raw(",");
        }
        w.raw("\n");
        ts.footer = w.append(");");
        idx.tables.push_back(std::move(ts));
    }
    return {std::move(w.text), std::move(idx)};
}

namespace {

std::string quote_ident(const std::string& name) {
    std::string out = "\"";
    for (char c : name) {
        out += c;
        if (c == '"') out += '"';
    }
    return out + "\"";
}

}  // namespace

std::vector<std::string> sample_value_examples(const Database& db, const std::string& table, const std::string& column,
                                               std::size_t limit) {
    const auto rs = db.query("SELECT " + quote_ident(column) + " FROM " + quote_ident(table) + " WHERE " + quote_ident(column) +
                             " IS NOT NULL");
    std::vector<std::string> out;
    for (const auto& row : rs.rows) {
        if (out.size() >= limit) break;
        std::string lit = render_literal(row.at(0));
        if (std::find(out.begin(), out.end(), lit) == out.end()) out.push_back(std::move(lit));
    }
    return out;
}

void attach_examples(SchemaDocument& doc, const Database& db) {
    for (auto& t : doc.tables) {
        for (auto& c : t.columns) c.examples = sample_value_examples(db, t.name, c.name);
    }
}

std::vector<int> label_vector(const LinkSet& links, const SchemaDocument& doc) {
    std::vector<int> y;
    y.reserve(doc.column_count());
    std::size_t matched = 0;
    for (const auto& t : doc.tables) {
        for (const auto& c : t.columns) {
            const bool hit = links.count(QualifiedColumn(t.name, c.name)) > 0;
            matched += hit ? 1 : 0;
            y.push_back(hit ? 1 : 0);
        }
    }
    if (matched != links.size()) {
        for (const auto& l : links) {
            const Table* t = doc.find_table(l.table);
            if (!t || !t->find_column(l.column)) throw Error(ErrorCode::UnknownColumn, "link " + l.str() + " not in schema");
        }
    }
    return y;
}

}  // namespace jolt
