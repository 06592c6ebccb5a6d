#include <gtest/gtest.h>

#include <regex>
#include <thread>

#include "fixtures/extractor_fixtures.hpp"
#include "jolt/error.hpp"
#include "jolt/sql.hpp"

using namespace jolt;
using namespace jolt::sql;

namespace {

SchemaDocument small_schema() {
    SchemaDocument doc;
    doc.tables.push_back({"singer", {{"id", "INTEGER", {}}, {"name", "TEXT", {}}, {"age", "INTEGER", {}}}, {"id"}, {}});
    doc.tables.push_back({"concert", {{"concert_id", "INTEGER", {}}, {"singer_id", "INTEGER", {}}, {"year", "INTEGER", {}}},
                          {"concert_id"}, {{"singer_id", "singer", "id"}}});
    doc.tables.push_back({"a", {{"id", "INTEGER", {}}, {"y", "INTEGER", {}}}, {}, {}});
    doc.tables.push_back({"b", {{"id", "INTEGER", {}}, {"x", "INTEGER", {}}}, {}, {}});
    return doc;
}

std::vector<std::string> strs(const LinkSet& links) {
    std::vector<std::string> out;
    for (const auto& l : links) out.push_back(l.str());
    return out;
}

LinkSet to_set(const std::vector<std::string>& v) {
    LinkSet s;
    for (const auto& x : v) s.insert(QualifiedColumn::parse(x));
    return s;
}

ErrorCode error_of(const std::string& sql, const SchemaDocument& schema) {
    try {
        extract_links(sql, schema);
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an error for " << sql;
    return ErrorCode::IoError;
}

}  // namespace

TEST(ParseSql, MinimalStatement) {
    const auto ast = parse_sql("SELECT name FROM singer");
    ASSERT_EQ(ast.root->selects.size(), 1u);
    const auto& s = ast.root->selects[0];
    ASSERT_EQ(s.items.size(), 1u);
    EXPECT_EQ(s.items[0].expr.kind, ExprKind::Column);
    EXPECT_EQ(s.items[0].expr.name, "name");
    EXPECT_TRUE(s.items[0].expr.qualifier.empty());
    ASSERT_EQ(s.from.size(), 1u);
    EXPECT_EQ(s.from[0].table, "singer");
    EXPECT_EQ(ast.reference_count, 1);
}

TEST(ParseSql, AliasBoundToTable) {
    const auto ast = parse_sql("SELECT T1.name FROM singer AS T1");
    const auto& s = ast.root->selects[0];
    EXPECT_EQ(s.items[0].expr.qualifier, "t1");
    EXPECT_EQ(s.items[0].expr.name, "name");
    ASSERT_EQ(s.from.size(), 1u);
    EXPECT_EQ(s.from[0].table, "singer");
    EXPECT_EQ(s.from[0].alias, "t1");
    EXPECT_EQ(s.from[0].visible_name(), "t1");
}

TEST(ParseSql, MalformedReportsOffsetZero) {
    try {
        parse_sql("SELEC x FRM t");
        FAIL() << "expected SyntaxError";
    } catch (const SyntaxError& e) {
        EXPECT_EQ(e.offset(), 0u);
    }
}

TEST(ParseSql, ErrorOffsetPointsAtBadToken) {
    try {
        parse_sql("SELECT a FROM t WHERE");
        FAIL();
    } catch (const SyntaxError& e) {
        EXPECT_EQ(e.offset(), 21u);
    }
    EXPECT_THROW(parse_sql("   "), SyntaxError);
    EXPECT_THROW(parse_sql("SELECT 'abc FROM t"), SyntaxError);
}

TEST(ParseSql, RejectsCteAndWindow) {
    try {
        parse_sql("WITH x AS (SELECT 1) SELECT * FROM x");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Unsupported);
    }
    try {
        parse_sql("SELECT rank() OVER (ORDER BY a) FROM t");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Unsupported);
    }
}

TEST(ParseSql, CompoundAndOrderBy) {
    const auto ast = parse_sql("SELECT a FROM t UNION SELECT b FROM u ORDER BY a LIMIT 3");
    EXPECT_EQ(ast.root->selects.size(), 2u);
    ASSERT_EQ(ast.root->set_ops.size(), 1u);
    EXPECT_EQ(ast.root->set_ops[0], SetOp::Union);
    EXPECT_TRUE(has_top_level_order_by(ast));
    EXPECT_FALSE(has_top_level_order_by(parse_sql("SELECT a FROM t WHERE a IN (SELECT b FROM u ORDER BY b)")));
}

TEST(ResolveScopes, JoinWithAliases) {
    const auto schema = small_schema();
    const auto resolved =
        resolve_scopes(parse_sql("SELECT T1.name FROM singer AS T1 JOIN concert AS T2 ON T1.id = T2.singer_id"), schema);
    const auto& item = resolved.ast.root->selects[0].items[0].expr;
    ASSERT_EQ(resolved.binding(item).columns.size(), 1u);
    EXPECT_EQ(resolved.binding(item).columns[0].table, "singer");
    EXPECT_EQ(strs(extract_links(resolved, schema)),
              (std::vector<std::string>{"concert.singer_id", "singer.id", "singer.name"}));
}

TEST(ResolveScopes, AmbiguousUnknownErrors) {
    const auto schema = small_schema();
    EXPECT_EQ(error_of("SELECT id FROM a JOIN b ON a.y = b.x", schema), ErrorCode::AmbiguousColumn);
    EXPECT_EQ(error_of("SELECT nope FROM a", schema), ErrorCode::UnknownColumn);
    EXPECT_EQ(error_of("SELECT a.nope FROM a", schema), ErrorCode::UnknownColumn);
    EXPECT_EQ(error_of("SELECT x FROM missing", schema), ErrorCode::UnknownTable);
    EXPECT_EQ(error_of("SELECT z.x FROM b", schema), ErrorCode::UnknownTable);
    EXPECT_EQ(error_of("SELECT a.y FROM a AS t", schema), ErrorCode::UnknownTable);
}

TEST(ResolveScopes, DuplicateAliasRejected) {
    EXPECT_THROW(resolve_scopes(parse_sql("SELECT 1 FROM a AS t JOIN b AS t ON t.id = t.id"), small_schema()), SyntaxError);
}

TEST(ResolveScopes, CorrelatedSubqueryBindsOuter) {
    const auto schema = small_schema();
    const auto resolved = resolve_scopes(parse_sql("SELECT * FROM a WHERE EXISTS (SELECT 1 FROM b WHERE b.x = a.y)"), schema);
    const auto& exists = *resolved.ast.root->selects[0].where;
    ASSERT_EQ(exists.kind, ExprKind::Exists);
    const auto& cmp = *exists.subquery->selects[0].where;
    const auto& outer_ref = cmp.args[1];
    ASSERT_EQ(outer_ref.name, "y");
    EXPECT_EQ(resolved.binding(outer_ref).columns.at(0), QualifiedColumn("a", "y"));
}

TEST(ResolveScopes, InnerScopeShadowsOuter) {
    // Unqualified id inside the subquery binds to b, the innermost definer.
    const auto links = extract_links("SELECT y FROM a WHERE y IN (SELECT id FROM b)", small_schema());
    EXPECT_EQ(strs(links), (std::vector<std::string>{"a.y", "b.id"}));
}

TEST(ExtractLinks, WorkedExamples) {
    const auto schema = small_schema();
    EXPECT_EQ(strs(extract_links("SELECT name FROM singer", schema)), (std::vector<std::string>{"singer.name"}));
    EXPECT_EQ(strs(extract_links("SELECT * FROM singer", schema)),
              (std::vector<std::string>{"singer.age", "singer.id", "singer.name"}));
    EXPECT_EQ(strs(extract_links("SELECT COUNT(*) FROM concert WHERE year > 2000", schema)),
              (std::vector<std::string>{"concert.year"}));
    EXPECT_TRUE(extract_links("SELECT 1 FROM singer LIMIT 3", schema).empty());
}

TEST(ExtractLinks, HandLabeledFixtures) {
    const auto schema = fixtures::concert_singer_schema();
    for (const auto& fx : fixtures::extractor_fixtures()) {
        SCOPED_TRACE(fx.sql);
        EXPECT_EQ(extract_links(fx.sql, schema), to_set(fx.links));
    }
}

TEST(ExtractLinks, SoundnessAndDeterminism) {
    const auto schema = fixtures::concert_singer_schema();
    for (const auto& fx : fixtures::extractor_fixtures()) {
        const auto a = extract_links(fx.sql, schema);
        const auto b = extract_links(fx.sql, schema);
        EXPECT_EQ(a, b);
        for (const auto& qc : a) {
            const Table* t = schema.find_table(qc.table);
            ASSERT_NE(t, nullptr);
            EXPECT_NE(t->find_column(qc.column), nullptr) << qc.str();
        }
    }
}

TEST(ExtractLinks, AliasTransparency) {
    const auto schema = fixtures::concert_singer_schema();
    const std::vector<std::pair<std::regex, std::string>> renames = {
        {std::regex(R"(\bT1\b)"), "alpha"}, {std::regex(R"(\bT2\b)"), "beta"}, {std::regex(R"(\bT3\b)"), "gamma"},
        {std::regex(R"(\bsub\b)"), "derived_q"}, {std::regex(R"(\bs\b)"), "st"}, {std::regex(R"(\bc\b)"), "co"}};
    int renamed = 0;
    for (const auto& fx : fixtures::extractor_fixtures()) {
        std::string sql = fx.sql;
        for (const auto& [re, to] : renames) sql = std::regex_replace(sql, re, to);
        if (sql == fx.sql) continue;
        ++renamed;
        EXPECT_EQ(extract_links(sql, schema), extract_links(fx.sql, schema)) << sql;
    }
    EXPECT_GE(renamed, 9);
}

TEST(ExtractLinks, SubqueryClosure) {
    // Each query's links equal the union of links of its flattened parts.
    const auto schema = fixtures::concert_singer_schema();
    const std::vector<std::pair<std::string, std::vector<std::string>>> cases = {
        {"SELECT name FROM stadium WHERE stadium_id NOT IN (SELECT stadium_id FROM concert)",
         {"SELECT name, stadium_id FROM stadium", "SELECT stadium_id FROM concert"}},
        {"SELECT song_name FROM singer WHERE age > (SELECT avg(age) FROM singer)",
         {"SELECT song_name, age FROM singer", "SELECT avg(age) FROM singer"}},
        {"SELECT country FROM singer WHERE age > 40 INTERSECT SELECT country FROM singer WHERE age < 30",
         {"SELECT country FROM singer WHERE age > 40", "SELECT country FROM singer WHERE age < 30"}},
        {"SELECT name FROM singer WHERE singer_id IN (SELECT singer_id FROM singer_in_concert WHERE concert_id IN "
         "(SELECT concert_id FROM concert WHERE year = 2015))",
         {"SELECT name, singer_id FROM singer", "SELECT singer_id, concert_id FROM singer_in_concert",
          "SELECT concert_id FROM concert WHERE year = 2015"}},
        {"SELECT name FROM stadium WHERE stadium_id = (SELECT stadium_id FROM concert ORDER BY year DESC LIMIT 1)",
         {"SELECT name, stadium_id FROM stadium", "SELECT stadium_id, year FROM concert"}},
    };
    for (const auto& [whole, parts] : cases) {
        LinkSet uni;
        for (const auto& p : parts) {
            auto l = extract_links(p, schema);
            uni.insert(l.begin(), l.end());
        }
        EXPECT_EQ(extract_links(whole, schema), uni) << whole;
    }
}

TEST(ExtractLinks, ConcurrentCallsAgree) {
    const auto schema = fixtures::concert_singer_schema();
    const auto fx = fixtures::extractor_fixtures();
    std::vector<std::vector<LinkSet>> results(4);
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t) {
        threads.emplace_back([&, t] {
            for (const auto& f : fx) results[t].push_back(extract_links(f.sql, schema));
        });
    }
    for (auto& th : threads) th.join();
    for (int t = 1; t < 4; ++t) EXPECT_EQ(results[t], results[0]);
}
