#include "jolt/db.hpp"

#include <sqlite3.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "jolt/error.hpp"

namespace jolt {

Database::Database(const std::string& path, Mode mode) {
    int flags = SQLITE_OPEN_NOMUTEX;
    switch (mode) {
        case Mode::ReadOnly: flags |= SQLITE_OPEN_READONLY; break;
        case Mode::ReadWrite: flags |= SQLITE_OPEN_READWRITE; break;
        case Mode::Create: flags |= SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE; break;
    }
    if (mode == Mode::ReadOnly && !std::filesystem::exists(path)) throw Error(ErrorCode::DbUnavailable, "no database at " + path);
    if (sqlite3_open_v2(path.c_str(), &db_, flags, nullptr) != SQLITE_OK) {
        std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
        sqlite3_close(db_);
        db_ = nullptr;
        throw Error(ErrorCode::DbUnavailable, path + ": " + msg);
    }
}

Database::Database() {
    if (sqlite3_open_v2(":memory:", &db_, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_NOMUTEX, nullptr) != SQLITE_OK) {
        sqlite3_close(db_);
        db_ = nullptr;
        throw Error(ErrorCode::DbUnavailable, "cannot open in-memory database");
    }
}

Database::~Database() {
    if (db_) sqlite3_close(db_);
}

Database::Database(Database&& other) noexcept : db_(other.db_) { other.db_ = nullptr; }

Database& Database::operator=(Database&& other) noexcept {
    if (this != &other) {
        if (db_) sqlite3_close(db_);
        db_ = other.db_;
        other.db_ = nullptr;
    }
    return *this;
}

void Database::exec(const std::string& sql) {
    char* err = nullptr;
    if (sqlite3_exec(db_, sql.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
        std::string msg = err ? err : "unknown error";
        sqlite3_free(err);
        throw Error(ErrorCode::DbError, msg);
    }
}

namespace {

struct Deadline {
    std::chrono::steady_clock::time_point until;
};

int progress_check(void* arg) {
    const auto* d = static_cast<const Deadline*>(arg);
    return std::chrono::steady_clock::now() > d->until ? 1 : 0;
}

struct Statement {
    sqlite3_stmt* stmt = nullptr;
    ~Statement() { sqlite3_finalize(stmt); }
};

}  // namespace

ResultSet Database::query(const std::string& sql, std::chrono::milliseconds timeout) const {
    Deadline deadline{std::chrono::steady_clock::now() + timeout};
    sqlite3_progress_handler(db_, 1000, progress_check, &deadline);
    struct Reset {
        sqlite3* db;
        ~Reset() { sqlite3_progress_handler(db, 0, nullptr, nullptr); }
    } reset{db_};

    Statement st;
    const char* tail = nullptr;
    if (sqlite3_prepare_v2(db_, sql.c_str(), static_cast<int>(sql.size()), &st.stmt, &tail) != SQLITE_OK) {
        throw Error(ErrorCode::DbError, sqlite3_errmsg(db_));
    }
    if (!st.stmt) throw Error(ErrorCode::DbError, "empty statement");
    ResultSet rs;
    const int ncol = sqlite3_column_count(st.stmt);
    for (int c = 0; c < ncol; ++c) rs.columns.emplace_back(sqlite3_column_name(st.stmt, c));
    while (true) {
        const int rc = sqlite3_step(st.stmt);
        if (rc == SQLITE_DONE) break;
        if (rc != SQLITE_ROW) {
            if (rc == SQLITE_INTERRUPT) throw Error(ErrorCode::DbError, "query timed out");
            throw Error(ErrorCode::DbError, sqlite3_errmsg(db_));
        }
        std::vector<Value> row;
        row.reserve(static_cast<std::size_t>(ncol));
        for (int c = 0; c < ncol; ++c) {
            switch (sqlite3_column_type(st.stmt, c)) {
                case SQLITE_INTEGER: row.emplace_back(static_cast<std::int64_t>(sqlite3_column_int64(st.stmt, c))); break;
                case SQLITE_FLOAT: row.emplace_back(sqlite3_column_double(st.stmt, c)); break;
                case SQLITE_NULL: row.emplace_back(std::monostate{}); break;
                default: {
                    const auto* text = reinterpret_cast<const char*>(sqlite3_column_text(st.stmt, c));
                    row.emplace_back(std::string(text ? text : "", static_cast<std::size_t>(sqlite3_column_bytes(st.stmt, c))));
                }
            }
        }
        rs.rows.push_back(std::move(row));
    }
    return rs;
}

void Database::save_to(const std::string& path) const {
    std::filesystem::remove(path);
    sqlite3* dest = nullptr;
    if (sqlite3_open(path.c_str(), &dest) != SQLITE_OK) {
        sqlite3_close(dest);
        throw Error(ErrorCode::DbError, "cannot create " + path);
    }
    sqlite3_backup* backup = sqlite3_backup_init(dest, "main", db_, "main");
    if (!backup) {
        std::string msg = sqlite3_errmsg(dest);
        sqlite3_close(dest);
        throw Error(ErrorCode::DbError, msg);
    }
    sqlite3_backup_step(backup, -1);
    sqlite3_backup_finish(backup);
    const int rc = sqlite3_errcode(dest);
    sqlite3_close(dest);
    if (rc != SQLITE_OK) throw Error(ErrorCode::DbError, "backup to " + path + " failed");
}

std::string render_literal(const Value& v) {
    if (std::holds_alternative<std::monostate>(v)) return "NULL";
    if (const auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
    if (const auto* d = std::get_if<double>(&v)) {
        if (std::floor(*d) == *d && std::fabs(*d) < 1e15) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.1f", *d);
            return buf;
        }
        std::ostringstream os;
        os.precision(15);
        os << *d;
        return os.str();
    }
    const auto& s = std::get<std::string>(v);
    std::string out = "'";
    for (char c : s) {
        out += c;
        if (c == '\'') out += '\'';
    }
    return out + "'";
}

}  // namespace jolt
