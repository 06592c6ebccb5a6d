#include "jolt/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>

#include "jolt/error.hpp"
#include "jolt/eval.hpp"
#include "jolt/rng.hpp"

namespace jolt {

void CorpusConfig::validate() const {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw Error(ErrorCode::ConfigError, what);
    };
    require(num_databases >= 1, "num_databases must be >= 1");
    require(num_examples >= num_databases, "num_examples must be >= num_databases");
    require(min_tables >= 1 && min_tables <= max_tables && max_tables <= 4, "tables range must satisfy 1 <= min <= max <= 4");
    require(min_columns >= 3 && min_columns <= max_columns && max_columns <= 9, "columns range must satisfy 3 <= min <= max <= 9");
    require(min_rows >= 5 && min_rows <= max_rows, "rows range must satisfy 5 <= min <= max");
    require(!templates.empty(), "templates must not be empty");
    for (const auto& t : templates) {
        require(std::find(kCorpusTemplates.begin(), kCorpusTemplates.end(), t) != kCorpusTemplates.end(), "unknown template '" + t + "'");
    }
    require(train_ratio > 0 && train_ratio < 1, "train_ratio must lie in (0, 1)");
    require(max_len >= 16, "max_len must be >= 16");
    require(threads >= 1, "threads must be >= 1");
}

nlohmann::json CorpusConfig::to_json() const {
    return {{"num_databases", num_databases},
            {"num_examples", num_examples},
            {"tables", {min_tables, max_tables}},
            {"columns", {min_columns, max_columns}},
            {"rows", {min_rows, max_rows}},
            {"templates", templates},
            {"train_ratio", train_ratio},
            {"seed", seed},
            {"max_len", max_len},
            {"threads", threads}};
}

CorpusConfig CorpusConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(ErrorCode::ConfigError, "corpus config must be an object");
    CorpusConfig c;
    auto range = [](const nlohmann::json& v, std::size_t& lo, std::size_t& hi, const std::string& key) {
        if (!v.is_array() || v.size() != 2) throw Error(ErrorCode::ConfigError, key + " must be [min, max]");
        lo = v[0].get<std::size_t>();
        hi = v[1].get<std::size_t>();
    };
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "num_databases") c.num_databases = v.get<std::size_t>();
            else if (key == "num_examples") c.num_examples = v.get<std::size_t>();
            else if (key == "tables") range(v, c.min_tables, c.max_tables, key);
            else if (key == "columns") range(v, c.min_columns, c.max_columns, key);
            else if (key == "rows") range(v, c.min_rows, c.max_rows, key);
            else if (key == "templates") c.templates = v.get<std::vector<std::string>>();
            else if (key == "train_ratio") c.train_ratio = v.get<double>();
            else if (key == "seed") c.seed = v.get<std::uint64_t>();
            else if (key == "max_len") c.max_len = v.get<std::size_t>();
            else if (key == "threads") c.threads = v.get<std::size_t>();
            else throw Error(ErrorCode::ConfigError, "unknown corpus key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ConfigError, std::string("corpus config: ") + e.what());
    }
    c.validate();
    return c;
}

namespace {

using Pool = std::vector<std::string>;

const Pool kPeople = {"Joe Sharp", "Ann Lee", "Rose White", "Tom Hardy", "Mia Chen", "Luis Diaz", "Sara Khan", "Ivan Petrov"};
const Pool kFirst = {"Alice", "Bob", "Carla", "David", "Elena", "Frank", "Grace", "Hugo"};
const Pool kLast = {"Smith", "Jones", "Brown", "Garcia", "Kim", "Novak", "Silva", "Weber"};
const Pool kCountries = {"France", "Japan", "Brazil", "Canada", "Kenya", "Norway", "Peru", "India"};
const Pool kCities = {"Paris", "Tokyo", "Lima", "Oslo", "Cairo", "Denver", "Lyon", "Perth"};
const Pool kGenres = {"Rock", "Jazz", "Pop", "Folk", "Blues", "Soul"};
const Pool kDepts = {"Sales", "Finance", "Legal", "Research", "Support", "Design"};
const Pool kMajors = {"Biology", "Physics", "History", "Math", "Art", "Economics"};
const Pool kCourses = {"Algebra", "Poetry", "Chemistry", "Drawing", "Logic", "Statistics", "Geology", "Ethics"};
const Pool kProducts = {"Lamp", "Chair", "Kettle", "Phone", "Desk", "Clock", "Mirror", "Heater"};
const Pool kCategories = {"Home", "Office", "Kitchen", "Garden", "Sports", "Toys"};
const Pool kColors = {"Red", "Blue", "Green", "Black", "White", "Silver"};
const Pool kBrands = {"Acme", "Globex", "Initech", "Umbra", "Vertex", "Zenith"};
const Pool kAirlines = {"Sky Air", "Blue Jet", "Aero Star", "Nord Wing", "Sun Lines", "Pacific Way"};
const Pool kAlliances = {"Oneworld", "Skyteam", "Star", "None"};
const Pool kBooks = {"Deep Water", "Red Sky", "Iron Road", "Quiet Hill", "Lost City", "Cold Moon", "Old Bridge", "Last Light"};
const Pool kLanguages = {"English", "Spanish", "German", "French", "Hindi", "Swahili"};
const Pool kTeams = {"Lions", "Eagles", "Sharks", "Wolves", "Bears", "Hawks", "Tigers", "Foxes"};
const Pool kLeagues = {"East", "West", "North", "South"};
const Pool kShips = {"Aurora", "Neptune", "Valiant", "Orion", "Seahorse", "Titan", "Mariner", "Polaris"};
const Pool kShipTypes = {"Cargo", "Tanker", "Ferry", "Cruiser", "Trawler"};
const Pool kMuseums = {"City Museum", "Art House", "Science Hall", "War Museum", "Folk Gallery", "Sea Museum"};
const Pool kThemes = {"Art", "Science", "History", "Nature", "Maritime"};
const Pool kStadiums = {"Grand Arena", "River Park", "Hill Field", "Lake Dome", "Stone Bowl", "Oak Ground"};
const Pool kMakes = {"Ford", "Toyota", "Fiat", "Volvo", "Honda", "Skoda"};
const Pool kModels = {"Falcon", "Comet", "Breeze", "Ranger", "Spirit", "Nova", "Pulse", "Ridge"};
const Pool kRoles = {"Manager", "Engineer", "Analyst", "Clerk", "Director"};

enum class Kind { Text, Int, Real };

struct AttrSpec {
    const char* name;
    Kind kind;
    const Pool* pool = nullptr;
    int lo = 0, hi = 0, step = 1;
};

struct Archetype {
    const char* table;
    std::vector<AttrSpec> attrs;  // attrs[0] is the naming text column
};

AttrSpec text(const char* n, const Pool& p) { return {n, Kind::Text, &p}; }
AttrSpec integer(const char* n, int lo, int hi, int step) { return {n, Kind::Int, nullptr, lo, hi, step}; }
AttrSpec real(const char* n, int lo, int hi) { return {n, Kind::Real, nullptr, lo, hi, 1}; }

// Integer columns draw from few distinct values so filter literals recur across the corpus.
const std::vector<Archetype>& archetypes() {
    static const std::vector<Archetype> kAll = {
        {"singer", {text("name", kPeople), text("country", kCountries), integer("age", 20, 60, 5), text("genre", kGenres),
                    real("net_worth", 1, 90), text("birth_city", kCities), integer("debut_year", 1990, 2020, 5)}},
        {"stadium", {text("stadium_name", kStadiums), text("location", kCities), integer("capacity", 10000, 90000, 10000),
                     integer("opening_year", 1950, 2010, 10), real("average_attendance", 5, 80), integer("gates", 2, 12, 2),
                     text("owner", kPeople)}},
        {"student", {text("last_name", kLast), text("first_name", kFirst), integer("age", 17, 29, 2), text("major", kMajors),
                     real("gpa", 2, 4), text("home_city", kCities), integer("enroll_year", 2014, 2022, 2)}},
        {"course", {text("title", kCourses), text("department", kDepts), integer("credits", 1, 5, 1), integer("level", 100, 400, 100),
                    text("instructor", kPeople), integer("seats", 20, 120, 20), real("fee", 50, 500)}},
        {"employee", {text("name", kPeople), text("department", kDepts), integer("salary", 40000, 120000, 10000), integer("age", 25, 60, 5),
                      text("city", kCities), integer("hire_year", 2000, 2020, 5), text("role", kRoles)}},
        {"product", {text("product_name", kProducts), text("category", kCategories), real("price", 5, 400), integer("stock", 0, 500, 50),
                     text("color", kColors), real("weight", 1, 30), text("brand", kBrands)}},
        {"airline", {text("airline_name", kAirlines), text("country", kCountries), integer("fleet_size", 10, 200, 10),
                     integer("founded", 1930, 2010, 10), text("hub", kCities), real("rating", 1, 5), text("alliance", kAlliances)}},
        {"book", {text("title", kBooks), text("author", kPeople), integer("pages", 100, 900, 100), real("price", 5, 60),
                  integer("publish_year", 1960, 2020, 10), text("language", kLanguages), text("genre", kGenres)}},
        {"team", {text("team_name", kTeams), text("city", kCities), integer("wins", 0, 40, 5), integer("losses", 0, 40, 5),
                  text("coach", kPeople), integer("founded", 1900, 2000, 20), text("league", kLeagues)}},
        {"ship", {text("ship_name", kShips), text("ship_type", kShipTypes), integer("tonnage", 1000, 9000, 1000),
                  integer("built_year", 1970, 2020, 10), text("flag", kCountries), real("speed", 10, 40), text("captain", kPeople)}},
        {"museum", {text("museum_name", kMuseums), text("city", kCities), integer("num_staff", 10, 90, 10), integer("open_year", 1900, 2000, 20),
                    integer("visitors", 1000, 9000, 1000), real("ticket_price", 2, 30), text("theme", kThemes)}},
        {"car", {text("model", kModels), text("make", kMakes), integer("horsepower", 80, 400, 40), real("mpg", 15, 50),
                 integer("year", 2000, 2020, 5), text("color", kColors), integer("price", 10000, 60000, 10000)}},
    };
    return kAll;
}

struct GenColumn {
    std::string name;
    Kind kind;
    bool key = false;  // id or foreign key
    std::vector<Value> values;
};

struct GenTable {
    std::string name;
    std::vector<GenColumn> columns;
    int parent = -1;
    std::size_t rows = 0;
};

const char* sql_type(Kind k) {
    switch (k) {
        case Kind::Text: return "TEXT";
        case Kind::Int: return "INTEGER";
        case Kind::Real: return "REAL";
    }
    return "TEXT";
}

Value draw_value(const AttrSpec& a, CounterRng& rng) {
    switch (a.kind) {
        case Kind::Text: return (*a.pool)[rng.below(a.pool->size())];
        case Kind::Int: return static_cast<std::int64_t>(a.lo + a.step * static_cast<int>(rng.below(static_cast<std::uint64_t>((a.hi - a.lo) / a.step + 1))));
        case Kind::Real: {
            const auto tenths = rng.between(static_cast<std::int64_t>(a.lo) * 10, static_cast<std::int64_t>(a.hi) * 10);
            // Keep a fractional digit so values stay REAL on the way back.
            return static_cast<double>(tenths - (tenths % 10 == 0 ? 5 : 0)) / 10.0;
        }
    }
    return {};
}

std::vector<GenTable> design_tables(const CorpusConfig& cfg, CounterRng& rng) {
    const auto& all = archetypes();
    const std::size_t n_tables = static_cast<std::size_t>(rng.between(static_cast<std::int64_t>(cfg.min_tables), static_cast<std::int64_t>(cfg.max_tables)));
    std::vector<std::size_t> pick(all.size());
    std::iota(pick.begin(), pick.end(), 0);
    for (std::size_t i = pick.size(); i > 1; --i) std::swap(pick[i - 1], pick[rng.below(i)]);

    std::vector<GenTable> tables;
    for (std::size_t t = 0; t < n_tables; ++t) {
        const Archetype& arch = all[pick[t]];
        GenTable g;
        g.name = arch.table;
        g.parent = t == 0 ? -1 : static_cast<int>(rng.below(t));
        g.rows = static_cast<std::size_t>(rng.between(static_cast<std::int64_t>(cfg.min_rows), static_cast<std::int64_t>(cfg.max_rows)));
        const std::size_t n_cols = static_cast<std::size_t>(rng.between(static_cast<std::int64_t>(cfg.min_columns), static_cast<std::int64_t>(cfg.max_columns)));
        const std::size_t keys = g.parent >= 0 ? 2 : 1;
        const std::size_t n_attr = std::clamp<std::size_t>(n_cols > keys ? n_cols - keys : 1, 1, arch.attrs.size());
        // attrs[0] always; the rest a random subset in archetype order.
        std::vector<std::size_t> rest(arch.attrs.size() - 1);
        std::iota(rest.begin(), rest.end(), 1);
        for (std::size_t i = rest.size(); i > 1; --i) std::swap(rest[i - 1], rest[rng.below(i)]);
        std::vector<std::size_t> chosen = {0};
        chosen.insert(chosen.end(), rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_attr - 1));
        std::sort(chosen.begin(), chosen.end());

        GenColumn id{g.name + "_id", Kind::Int, true, {}};
        for (std::size_t r = 0; r < g.rows; ++r) id.values.push_back(static_cast<std::int64_t>(r + 1));
        g.columns.push_back(std::move(id));
        for (auto a : chosen) {
            GenColumn c{arch.attrs[a].name, arch.attrs[a].kind, false, {}};
            for (std::size_t r = 0; r < g.rows; ++r) c.values.push_back(draw_value(arch.attrs[a], rng));
            g.columns.push_back(std::move(c));
        }
        if (g.parent >= 0) {
            const GenTable& p = tables[static_cast<std::size_t>(g.parent)];
            GenColumn fk{p.name + "_id", Kind::Int, true, {}};
            for (std::size_t r = 0; r < g.rows; ++r) fk.values.push_back(static_cast<std::int64_t>(rng.between(1, static_cast<std::int64_t>(p.rows))));
            g.columns.push_back(std::move(fk));
        }
        tables.push_back(std::move(g));
    }
    return tables;
}

void materialize(const std::vector<GenTable>& tables, Database& db, SchemaDocument& doc) {
    std::string ddl;
    for (const auto& t : tables) {
        Table st;
        st.name = t.name;
        ddl += "CREATE TABLE " + t.name + " (";
        for (std::size_t c = 0; c < t.columns.size(); ++c) {
            const auto& col = t.columns[c];
            st.columns.push_back({col.name, sql_type(col.kind), {}});
            ddl += (c ? ", " : "") + col.name + " " + sql_type(col.kind);
        }
        ddl += ", PRIMARY KEY (" + t.name + "_id)";
        st.primary_key = {t.name + "_id"};
        if (t.parent >= 0) {
            const auto& p = tables[static_cast<std::size_t>(t.parent)].name;
            ddl += ", FOREIGN KEY (" + p + "_id) REFERENCES " + p + " (" + p + "_id)";
            st.foreign_keys.push_back({p + "_id", p, p + "_id"});
        }
        ddl += ");\n";
        for (std::size_t r = 0; r < t.rows; ++r) {
            ddl += "INSERT INTO " + t.name + " VALUES (";
            for (std::size_t c = 0; c < t.columns.size(); ++c) ddl += (c ? ", " : "") + render_literal(t.columns[c].values[r]);
            ddl += ");\n";
        }
        doc.tables.push_back(std::move(st));
    }
    db.exec("BEGIN;\n" + ddl + "COMMIT;");
    attach_examples(doc, db);
    doc.validate();
}

struct Draft {
    std::string question;
    std::string sql;
};

class Renderer {
public:
    Renderer(const std::vector<GenTable>& tables, CounterRng& rng) : tables_(tables), rng_(rng) {}

    std::optional<Draft> render(const std::string& family) {
        if (family == "projection") return projection();
        if (family == "filter") return filter();
        if (family == "aggregate") return aggregate();
        if (family == "join") return join();
        if (family == "order_limit") return order_limit();
        return std::nullopt;
    }

private:
    const std::string& pick(const std::vector<std::string>& options) { return options[rng_.below(options.size())]; }

    const GenTable& any_table() { return tables_[rng_.below(tables_.size())]; }

    /// Non-key column indices of `t`, restricted to `kinds` when given.
    std::vector<std::size_t> attrs(const GenTable& t, std::initializer_list<Kind> kinds = {}) const {
        std::vector<std::size_t> out;
        for (std::size_t c = 0; c < t.columns.size(); ++c) {
            if (t.columns[c].key) continue;
            if (kinds.size() && std::find(kinds.begin(), kinds.end(), t.columns[c].kind) == kinds.end()) continue;
            out.push_back(c);
        }
        return out;
    }

    std::optional<std::size_t> choose(const std::vector<std::size_t>& from, std::optional<std::size_t> except = std::nullopt) {
        std::vector<std::size_t> pool;
        for (auto c : from) {
            if (!except || c != *except) pool.push_back(c);
        }
        if (pool.empty()) return std::nullopt;
        return pool[rng_.below(pool.size())];
    }

    std::string value_of(const GenTable& t, std::size_t c) { return render_literal(t.columns[c].values[rng_.below(t.rows)]); }

    std::optional<Draft> projection() {
        const auto& t = any_table();
        const auto a = choose(attrs(t));
        const std::string lead = pick({"List", "Show", "Give"});
        const std::string tail = pick({"of every", "of all", "for each"});
        if (rng_.below(2) == 0) {
            const auto b = choose(attrs(t), a);
            if (b) {
                const auto& an = t.columns[*a].name;
                const auto& bn = t.columns[*b].name;
                return Draft{lead + " the " + an + " and " + bn + " " + tail + " " + t.name + ".", "SELECT " + an + ", " + bn + " FROM " + t.name};
            }
        }
        const auto& an = t.columns[*a].name;
        return Draft{lead + " the " + an + " " + tail + " " + t.name + ".", "SELECT " + an + " FROM " + t.name};
    }

    std::optional<Draft> filter() {
        const auto& t = any_table();
        if (rng_.below(2) == 0) {
            const auto b = choose(attrs(t, {Kind::Text}));
            if (!b) return std::nullopt;
            const auto a = choose(attrs(t), b);
            if (!a) return std::nullopt;
            const auto& an = t.columns[*a].name;
            const auto& bn = t.columns[*b].name;
            const std::string v = value_of(t, *b);
            return Draft{pick({"What is", "Find", "Show"}) + " the " + an + " of the " + t.name + " whose " + bn + " is " + v + "?",
                         "SELECT " + an + " FROM " + t.name + " WHERE " + bn + " = " + v};
        }
        const auto n = choose(attrs(t, {Kind::Int}));
        if (!n) return std::nullopt;
        const auto a = choose(attrs(t), n);
        if (!a) return std::nullopt;
        const auto& an = t.columns[*a].name;
        const auto& nn = t.columns[*n].name;
        const std::string v = value_of(t, *n);
        const bool greater = rng_.below(2) == 0;
        const std::string words = greater ? pick({"greater than", "above", "over"}) : pick({"less than", "below", "under"});
        return Draft{"Show the " + an + " of " + t.name + " with " + nn + " " + words + " " + v + ".",
                     "SELECT " + an + " FROM " + t.name + " WHERE " + nn + (greater ? " > " : " < ") + v};
    }

    std::optional<Draft> aggregate() {
        const auto& t = any_table();
        switch (rng_.below(4)) {
            case 0: {
                const auto b = choose(attrs(t, {Kind::Text}));
                if (!b) return std::nullopt;
                const auto& bn = t.columns[*b].name;
                return Draft{pick({"How many " + t.name + " are there for each " + bn + "?", "Count the " + t.name + " in each " + bn + "."}),
                             "SELECT " + bn + ", COUNT(*) FROM " + t.name + " GROUP BY " + bn};
            }
            case 1: {
                const auto b = choose(attrs(t, {Kind::Text}));
                const auto n = choose(attrs(t, {Kind::Int, Kind::Real}));
                if (!b || !n) return std::nullopt;
                const auto& bn = t.columns[*b].name;
                const auto& nn = t.columns[*n].name;
                return Draft{"What is the " + pick({"average", "mean"}) + " " + nn + " of " + t.name + " for each " + bn + "?",
                             "SELECT " + bn + ", AVG(" + nn + ") FROM " + t.name + " GROUP BY " + bn};
            }
            case 2: {
                const auto b = choose(attrs(t, {Kind::Text}));
                if (!b) return std::nullopt;
                const auto& bn = t.columns[*b].name;
                const std::string v = value_of(t, *b);
                return Draft{"How many " + t.name + " have " + bn + " " + v + "?", "SELECT COUNT(*) FROM " + t.name + " WHERE " + bn + " = " + v};
            }
            default: {
                const auto n = choose(attrs(t, {Kind::Int, Kind::Real}));
                if (!n) return std::nullopt;
                const auto& nn = t.columns[*n].name;
                const bool max = rng_.below(2) == 0;
                const std::string word = max ? pick({"maximum", "highest", "largest"}) : pick({"minimum", "lowest", "smallest"});
                return Draft{"What is the " + word + " " + nn + " of any " + t.name + "?",
                             std::string("SELECT ") + (max ? "MAX(" : "MIN(") + nn + ") FROM " + t.name};
            }
        }
    }

    std::optional<Draft> join() {
        std::vector<std::size_t> children;
        for (std::size_t i = 0; i < tables_.size(); ++i) {
            if (tables_[i].parent >= 0) children.push_back(i);
        }
        if (children.empty()) return std::nullopt;
        const GenTable& c = tables_[children[rng_.below(children.size())]];
        const GenTable& p = tables_[static_cast<std::size_t>(c.parent)];
        const auto a = choose(attrs(p));
        const auto b = choose(attrs(c, {Kind::Text}));
        if (!a || !b) return std::nullopt;
        const auto& an = p.columns[*a].name;
        const auto& bn = c.columns[*b].name;
        const std::string on = " FROM " + p.name + " AS T1 JOIN " + c.name + " AS T2 ON T1." + p.name + "_id = T2." + p.name + "_id";
        if (rng_.below(2) == 0) {
            const std::string v = value_of(c, *b);
            return Draft{"Show the " + an + " of each " + p.name + " that has a " + c.name + " whose " + bn + " is " + v + ".",
                         "SELECT T1." + an + on + " WHERE T2." + bn + " = " + v};
        }
        return Draft{"List the " + an + " of each " + p.name + " and the " + bn + " of its " + c.name + ".",
                     "SELECT T1." + an + ", T2." + bn + on};
    }

    std::optional<Draft> order_limit() {
        const auto& t = any_table();
        const auto n = choose(attrs(t, {Kind::Int, Kind::Real}));
        if (!n) return std::nullopt;
        const auto a = choose(attrs(t), n);
        if (!a) return std::nullopt;
        const auto& an = t.columns[*a].name;
        const auto& nn = t.columns[*n].name;
        const bool desc = rng_.below(2) == 0;
        const std::string word = desc ? pick({"highest", "largest"}) : pick({"lowest", "smallest"});
        const std::string k = std::to_string(std::vector<int>{1, 3, 5}[rng_.below(3)]);
        const std::string q = k == "1" ? "Which " + t.name + " has the " + word + " " + nn + "? Give its " + an + "."
                                       : "Show the " + an + " of the " + k + " " + t.name + " with the " + word + " " + nn + ".";
        return Draft{q, "SELECT " + an + " FROM " + t.name + " ORDER BY " + nn + (desc ? " DESC" : " ASC") + " LIMIT " + k};
    }

    const std::vector<GenTable>& tables_;
    CounterRng& rng_;
};

constexpr std::uint64_t kSplitStream = 0x53504C4954ULL;
constexpr std::size_t kAttemptsPerExample = 200;

struct DbOutput {
    GeneratedDatabase gdb;
    std::vector<TrainingExample> examples;
};

DbOutput generate_database(const CorpusConfig& cfg, std::size_t index, std::size_t n_examples) {
    CounterRng rng = CounterRng(cfg.seed).split(index);
    const auto tables = design_tables(cfg, rng);
    char idbuf[16];
    std::snprintf(idbuf, sizeof idbuf, "db%02zu_", index);
    DbOutput out{{idbuf + tables.front().name, {}, Database()}, {}};
    materialize(tables, out.gdb.db, out.gdb.doc);

    Renderer renderer(tables, rng);
    std::set<std::string> seen;
    std::size_t attempts = 0;
    while (out.examples.size() < n_examples) {
        if (++attempts > kAttemptsPerExample * n_examples) {
            throw Error(ErrorCode::ConfigError, out.gdb.db_id + ": could not render " + std::to_string(n_examples) + " distinct examples");
        }
        const auto draft = renderer.render(cfg.templates[rng.below(cfg.templates.size())]);
        if (!draft || seen.count(draft->sql)) continue;
        if (out.gdb.db.query(draft->sql).rows.empty()) continue;
        char qid[16];
        std::snprintf(qid, sizeof qid, "_q%03zu", out.examples.size());
        auto ex = build_training_example(out.gdb.db_id + qid, draft->question, out.gdb.doc, draft->sql, nullptr, out.gdb.db_id);
        if (encode(ex.prefix, ex.schema, ex.gold_sql, Vocab(), std::numeric_limits<std::size_t>::max()).tokens.size() > cfg.max_len) continue;
        seen.insert(draft->sql);
        out.examples.push_back(std::move(ex));
    }
    return out;
}

}  // namespace

Corpus generate_corpus(const CorpusConfig& cfg) {
    cfg.validate();
    const std::size_t per = cfg.num_examples / cfg.num_databases;
    const std::size_t extra = cfg.num_examples % cfg.num_databases;
    std::vector<std::optional<DbOutput>> parts(cfg.num_databases);
    parallel_for(cfg.num_databases, cfg.threads, [&](std::size_t i) { parts[i] = generate_database(cfg, i, per + (i < extra ? 1 : 0)); });

    Corpus corpus;
    std::vector<TrainingExample> all;
    for (auto& p : parts) {
        corpus.databases.push_back(std::move(p->gdb));
        for (auto& ex : p->examples) all.push_back(std::move(ex));
    }
    CounterRng rng = CounterRng(cfg.seed).split(kSplitStream);
    for (std::size_t i = all.size(); i > 1; --i) std::swap(all[i - 1], all[rng.below(i)]);
    const auto n_train = static_cast<std::size_t>(std::llround(cfg.train_ratio * static_cast<double>(all.size())));
    const std::size_t cut = std::clamp<std::size_t>(n_train, 1, all.size() - 1);
    corpus.train.assign(std::make_move_iterator(all.begin()), std::make_move_iterator(all.begin() + static_cast<std::ptrdiff_t>(cut)));
    corpus.dev.assign(std::make_move_iterator(all.begin() + static_cast<std::ptrdiff_t>(cut)), std::make_move_iterator(all.end()));
    return corpus;
}

void write_corpus(const Corpus& corpus, const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path root(dir);
    std::error_code ec;
    fs::create_directories(root / "dbs", ec);
    fs::create_directories(root / "schema", ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir + ": " + ec.message());
    for (const auto& g : corpus.databases) {
        const auto db_path = (root / "dbs" / (g.db_id + ".sqlite")).string();
        fs::remove(db_path, ec);
        g.db.save_to(db_path);
        std::ofstream os(root / "schema" / (g.db_id + ".json"), std::ios::trunc);
        if (!os) throw Error(ErrorCode::IoError, "cannot write schema for " + g.db_id);
        os << g.doc.to_json().dump(2) << '\n';
    }
    write_jsonl((root / "train.jsonl").string(), corpus.train);
    write_jsonl((root / "dev.jsonl").string(), corpus.dev);
}

CorpusStats corpus_stats(const std::vector<TrainingExample>& examples) {
    CorpusStats s;
    s.examples = examples.size();
    if (examples.empty()) return s;
    std::size_t columns = 0, positives = 0;
    for (const auto& ex : examples) {
        columns += ex.label.size();
        positives += static_cast<std::size_t>(std::count(ex.label.begin(), ex.label.end(), 1));
    }
    s.avg_columns = static_cast<double>(columns) / static_cast<double>(examples.size());
    s.positive_rate = columns ? static_cast<double>(positives) / static_cast<double>(columns) : 0.0;
    return s;
}

Vocab corpus_vocab(const std::vector<TrainingExample>& train, const std::vector<TrainingExample>& dev) {
    std::vector<std::string> texts;
    for (const auto& ex : train) {
        texts.push_back(ex.prefix);
        texts.push_back(ex.schema.text);
        texts.push_back(ex.gold_sql);
    }
    for (const auto& ex : dev) {
        texts.push_back(ex.prefix);
        texts.push_back(ex.schema.text);
    }
    return Vocab::build(texts);
}

}  // namespace jolt
