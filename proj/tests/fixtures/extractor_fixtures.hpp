#pragma once

#include <string>
#include <vector>

#include "jolt/schema.hpp"

namespace jolt::fixtures {

/// Four-table concert/singer schema used by the extractor fixtures.
inline SchemaDocument concert_singer_schema() {
    auto cols = [](std::initializer_list<std::pair<const char*, const char*>> cs) {
        std::vector<Column> out;
        for (auto [n, t] : cs) out.push_back({n, t, {}});
        return out;
    };
    SchemaDocument doc;
    doc.tables.push_back({"stadium",
                          cols({{"stadium_id", "INTEGER"}, {"location", "TEXT"}, {"name", "TEXT"}, {"capacity", "INTEGER"},
                                {"highest", "INTEGER"}, {"lowest", "INTEGER"}, {"average", "INTEGER"}}),
                          {"stadium_id"},
                          {}});
    doc.tables.push_back({"singer",
                          cols({{"singer_id", "INTEGER"}, {"name", "TEXT"}, {"country", "TEXT"}, {"song_name", "TEXT"},
                                {"song_release_year", "TEXT"}, {"age", "INTEGER"}, {"is_male", "TEXT"}}),
                          {"singer_id"},
                          {}});
    doc.tables.push_back({"concert",
                          cols({{"concert_id", "INTEGER"}, {"concert_name", "TEXT"}, {"theme", "TEXT"}, {"stadium_id", "INTEGER"},
                                {"year", "TEXT"}}),
                          {"concert_id"},
                          {{"stadium_id", "stadium", "stadium_id"}}});
    doc.tables.push_back({"singer_in_concert",
                          cols({{"concert_id", "INTEGER"}, {"singer_id", "INTEGER"}}),
                          {"concert_id", "singer_id"},
                          {{"concert_id", "concert", "concert_id"}, {"singer_id", "singer", "singer_id"}}});
    return doc;
}

struct ExtractorFixture {
    std::string sql;
    std::vector<std::string> links;
};

/// Hand-labeled ground truth; labels were written from a manual scope walk.
inline std::vector<ExtractorFixture> extractor_fixtures() {
    const std::vector<std::string> stadium_all = {"stadium.stadium_id", "stadium.location", "stadium.name", "stadium.capacity",
                                                  "stadium.highest", "stadium.lowest", "stadium.average"};
    auto with = [](std::vector<std::string> base, std::initializer_list<const char*> more) {
        base.insert(base.end(), more.begin(), more.end());
        return base;
    };
    return {
        {"SELECT count(*) FROM singer", {}},
        {"SELECT name, country, age FROM singer ORDER BY age DESC", {"singer.name", "singer.country", "singer.age"}},
        {"SELECT avg(age), min(age), max(age) FROM singer WHERE country = 'France'", {"singer.age", "singer.country"}},
        {"SELECT song_name, song_release_year FROM singer ORDER BY age LIMIT 1",
         {"singer.song_name", "singer.song_release_year", "singer.age"}},
        {"SELECT DISTINCT country FROM singer WHERE age > 20", {"singer.country", "singer.age"}},
        {"SELECT country, count(*) FROM singer GROUP BY country", {"singer.country"}},
        {"SELECT song_name FROM singer WHERE age > (SELECT avg(age) FROM singer)", {"singer.song_name", "singer.age"}},
        {"SELECT location, name FROM stadium WHERE capacity BETWEEN 5000 AND 10000",
         {"stadium.location", "stadium.name", "stadium.capacity"}},
        {"SELECT T2.name, count(*) FROM concert AS T1 JOIN stadium AS T2 ON T1.stadium_id = T2.stadium_id GROUP BY T1.stadium_id",
         {"stadium.name", "concert.stadium_id", "stadium.stadium_id"}},
        {"SELECT T2.name, T2.capacity FROM concert AS T1 JOIN stadium AS T2 ON T1.stadium_id = T2.stadium_id "
         "WHERE T1.year >= 2014 GROUP BY T2.stadium_id ORDER BY count(*) DESC LIMIT 1",
         {"stadium.name", "stadium.capacity", "concert.stadium_id", "stadium.stadium_id", "concert.year"}},
        {"SELECT name FROM stadium WHERE stadium_id NOT IN (SELECT stadium_id FROM concert)",
         {"stadium.name", "stadium.stadium_id", "concert.stadium_id"}},
        {"SELECT country FROM singer WHERE age > 40 INTERSECT SELECT country FROM singer WHERE age < 30",
         {"singer.country", "singer.age"}},
        {"SELECT name FROM stadium EXCEPT SELECT T2.name FROM concert AS T1 JOIN stadium AS T2 ON T1.stadium_id = T2.stadium_id "
         "WHERE T1.year = 2014",
         {"stadium.name", "concert.stadium_id", "stadium.stadium_id", "concert.year"}},
        {"SELECT T2.concert_name, T2.theme, count(*) FROM singer_in_concert AS T1 JOIN concert AS T2 ON T1.concert_id = T2.concert_id "
         "GROUP BY T2.concert_id",
         {"concert.concert_name", "concert.theme", "singer_in_concert.concert_id", "concert.concert_id"}},
        {"SELECT T2.name FROM singer_in_concert AS T1 JOIN singer AS T2 ON T1.singer_id = T2.singer_id "
         "JOIN concert AS T3 ON T1.concert_id = T3.concert_id WHERE T3.year = 2014",
         {"singer.name", "singer_in_concert.singer_id", "singer.singer_id", "singer_in_concert.concert_id", "concert.concert_id",
          "concert.year"}},
        {"SELECT name, country FROM singer WHERE song_name LIKE '%Hey%'", {"singer.name", "singer.country", "singer.song_name"}},
        {"SELECT T2.name, T2.location FROM concert AS T1 JOIN stadium AS T2 ON T1.stadium_id = T2.stadium_id WHERE T1.year = 2014 "
         "INTERSECT SELECT T2.name, T2.location FROM concert AS T1 JOIN stadium AS T2 ON T1.stadium_id = T2.stadium_id "
         "WHERE T1.year = 2015",
         {"stadium.name", "stadium.location", "concert.stadium_id", "stadium.stadium_id", "concert.year"}},
        {"SELECT * FROM stadium", stadium_all},
        {"SELECT T1.*, T2.year FROM stadium AS T1 JOIN concert AS T2 ON T1.stadium_id = T2.stadium_id",
         with(stadium_all, {"concert.year", "concert.stadium_id"})},
        {"SELECT name FROM stadium AS s WHERE EXISTS (SELECT 1 FROM concert AS c WHERE c.stadium_id = s.stadium_id AND c.year > 2013)",
         {"stadium.name", "concert.stadium_id", "stadium.stadium_id", "concert.year"}},
        {"SELECT sub.country FROM (SELECT country, age FROM singer WHERE is_male = 'T') AS sub WHERE sub.age > 30",
         {"singer.country", "singer.age", "singer.is_male"}},
        {"SELECT name, concert_name FROM concert JOIN stadium USING (stadium_id)",
         {"stadium.name", "concert.concert_name", "concert.stadium_id", "stadium.stadium_id"}},
        {"SELECT country, count(*) AS cnt FROM singer GROUP BY country HAVING count(*) > 1 ORDER BY cnt DESC", {"singer.country"}},
        {"SELECT concert_name, name FROM concert JOIN stadium ON concert.stadium_id = stadium.stadium_id WHERE capacity > 1000",
         {"concert.concert_name", "stadium.name", "concert.stadium_id", "stadium.stadium_id", "stadium.capacity"}},
        {"SELECT name FROM singer WHERE singer_id IN (SELECT singer_id FROM singer_in_concert WHERE concert_id IN "
         "(SELECT concert_id FROM concert WHERE year = 2015))",
         {"singer.name", "singer.singer_id", "singer_in_concert.singer_id", "singer_in_concert.concert_id", "concert.concert_id",
          "concert.year"}},
        {"SELECT name FROM stadium WHERE stadium_id = (SELECT stadium_id FROM concert ORDER BY year DESC LIMIT 1)",
         {"stadium.name", "stadium.stadium_id", "concert.stadium_id", "concert.year"}},
        {"SELECT name, CASE WHEN age > 30 THEN 'old' ELSE 'young' END FROM singer", {"singer.name", "singer.age"}},
        {"SELECT name FROM singer UNION ALL SELECT name FROM stadium", {"singer.name", "stadium.name"}},
        {"SELECT count(DISTINCT country) FROM singer WHERE is_male = 'F'", {"singer.country", "singer.is_male"}},
        {"select `Name` from SINGER where Age = 30", {"singer.name", "singer.age"}},
    };
}

}  // namespace jolt::fixtures
