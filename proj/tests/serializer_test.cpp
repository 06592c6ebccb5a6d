#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "fixtures/schema_fixtures.hpp"
#include "jolt/db.hpp"
#include "jolt/error.hpp"
#include "jolt/serializer.hpp"

using namespace jolt;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string slice(const std::string& s, const Span& span) { return s.substr(span.begin, span.size()); }

}  // namespace

TEST(SerializeSchema, SingleColumnRendersMarkerAndExamples) {
    SchemaDocument doc;
    doc.tables.push_back({"singer", {{"name", "TEXT", {"'Joe Sharp'", "'Timbaland'"}}}, {}, {}});
    const auto out = serialize_schema(doc);
    EXPECT_EQ(out.text, "CREATE TABLE singer (\n  name TEXT, -- examples: 'Joe Sharp', 'Timbaland' <|marker|>\n);");
    ASSERT_EQ(out.spans.tables.size(), 1u);
    const auto& col = out.spans.tables[0].columns.at(0);
    EXPECT_EQ(slice(out.text, col.definition), "name TEXT, -- examples: 'Joe Sharp', 'Timbaland' <|marker|>");
    EXPECT_EQ(slice(out.text, col.marker), "<|marker|>");
    EXPECT_FALSE(out.spans.tables[0].pk.has_value());
}

TEST(SerializeSchema, EmptyColumnListHasNoMarkers) {
    SchemaDocument doc;
    doc.tables.push_back({"empty", {}, {}, {}});
    const auto out = serialize_schema(doc);
    EXPECT_EQ(out.text, "CREATE TABLE empty (\n);");
    EXPECT_EQ(out.text.find("<|marker|>"), std::string::npos);
    EXPECT_EQ(out.spans.column_count(), 0u);
}

TEST(SerializeSchema, GoldenLayout) {
    auto doc = fixtures::singer_schema();
    auto db = fixtures::singer_db();
    attach_examples(doc, db);
    const auto out = serialize_schema(doc);
    EXPECT_EQ(out.text, slurp(JOLT_GOLDEN_DIR "/singer_schema.ddl"));
}

TEST(SerializeSchema, SpanFidelity) {
    auto doc = fixtures::singer_schema();
    auto db = fixtures::singer_db();
    attach_examples(doc, db);
    const auto out = serialize_schema(doc);
    std::size_t markers = 0;
    for (std::size_t ti = 0; ti < out.spans.tables.size(); ++ti) {
        const auto& t = out.spans.tables[ti];
        EXPECT_EQ(slice(out.text, t.header), "CREATE TABLE " + doc.tables[ti].name + " (");
        EXPECT_EQ(slice(out.text, t.footer), ");");
        ASSERT_TRUE(t.pk);
        EXPECT_EQ(slice(out.text, *t.pk).rfind("PRIMARY KEY (", 0), 0u);
        for (const auto& fk : t.fks) EXPECT_EQ(slice(out.text, fk).rfind("FOREIGN KEY (", 0), 0u);
        for (std::size_t ci = 0; ci < t.columns.size(); ++ci) {
            const auto& c = t.columns[ci];
            const std::string def = slice(out.text, c.definition);
            EXPECT_EQ(def.rfind(doc.tables[ti].columns[ci].name + " ", 0), 0u);
            EXPECT_TRUE(def.ends_with(kMarkerText));
            EXPECT_EQ(c.marker.end, c.definition.end);
            EXPECT_GT(c.definition.begin, t.header.end);
            EXPECT_LT(c.definition.end, t.footer.begin);
            ++markers;
        }
    }
    // Footer of one table ends strictly before the next header.
    EXPECT_LT(out.spans.tables[0].footer.end, out.spans.tables[1].header.begin);
    std::size_t literal_count = 0;
    for (auto p = out.text.find(kMarkerText); p != std::string::npos; p = out.text.find(kMarkerText, p + 1)) ++literal_count;
    EXPECT_EQ(markers, doc.column_count());
    EXPECT_EQ(literal_count, doc.column_count());
    EXPECT_EQ(serialize_schema(doc).text, out.text);
}

TEST(SerializeSchema, SpanIndexJsonRoundTrip) {
    const auto out = serialize_schema(fixtures::singer_schema());
    const auto back = SpanIndex::from_json(out.spans.to_json());
    EXPECT_EQ(back.to_json(), out.spans.to_json());
    EXPECT_EQ(back.tables.at(1).name, "concert");
    EXPECT_EQ(back.tables.at(1).fks.size(), 1u);
}

TEST(SampleValueExamples, DistinctFirstSeen) {
    Database db;
    db.exec("CREATE TABLE t (v TEXT, n INTEGER, e TEXT);"
            "INSERT INTO t VALUES ('A', 42, NULL), ('A', NULL, NULL), ('B', NULL, NULL), ('C', NULL, NULL);");
    EXPECT_EQ(sample_value_examples(db, "t", "v"), (std::vector<std::string>{"'A'", "'B'"}));
    EXPECT_EQ(sample_value_examples(db, "t", "n"), (std::vector<std::string>{"42"}));
    EXPECT_TRUE(sample_value_examples(db, "t", "e").empty());

    SchemaDocument doc;
    doc.tables.push_back({"t", {{"e", "TEXT", {}}}, {}, {}});
    attach_examples(doc, db);
    EXPECT_NE(serialize_schema(doc).text.find("-- examples: None <|marker|>"), std::string::npos);
}

TEST(SampleValueExamples, QueryFailureIsDbError) {
    Database db;
    try {
        sample_value_examples(db, "missing", "x");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DbError);
    }
}

TEST(LabelVector, Cases) {
    const auto doc = fixtures::singer_schema();
    EXPECT_EQ(label_vector({}, doc), std::vector<int>(8, 0));
    LinkSet all;
    for (const auto& t : doc.tables) {
        for (const auto& c : t.columns) all.insert({t.name, c.name});
    }
    EXPECT_EQ(label_vector(all, doc), std::vector<int>(8, 1));
    EXPECT_EQ(label_vector({QualifiedColumn("singer", "name")}, doc), (std::vector<int>{0, 1, 0, 0, 0, 0, 0, 0}));
    try {
        label_vector({QualifiedColumn("singer", "height")}, doc);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnknownColumn);
    }
}

TEST(SchemaDocument, JsonValidation) {
    const auto doc = fixtures::singer_schema();
    const auto back = SchemaDocument::from_json(doc.to_json());
    EXPECT_EQ(back.to_json(), doc.to_json());
    auto bad = doc.to_json();
    bad["tables"][0]["columns"].push_back({{"name", "name"}, {"type", "TEXT"}});
    EXPECT_THROW(SchemaDocument::from_json(bad), Error);
}
