#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

struct sqlite3;

namespace jolt {

/// One SQL value as returned by the engine.
using Value = std::variant<std::monostate, std::int64_t, double, std::string>;

struct ResultSet {
    std::vector<std::string> columns;
    std::vector<std::vector<Value>> rows;
};

/// Owning handle to an embedded SQLite database.
class Database {
public:
    enum class Mode { ReadOnly, ReadWrite, Create };

    /// Throws DbUnavailable when the file cannot be opened.
    explicit Database(const std::string& path, Mode mode = Mode::ReadOnly);
    /// In-memory database.
    Database();
    ~Database();

    Database(const Database&) = delete;
    Database& operator=(const Database&) = delete;
    Database(Database&& other) noexcept;
    Database& operator=(Database&& other) noexcept;

    /// Executes one or more statements without results. Throws DbError.
    void exec(const std::string& sql);

    /// Runs a query, aborting with DbError once `timeout` elapses.
    ResultSet query(const std::string& sql, std::chrono::milliseconds timeout = std::chrono::seconds(5)) const;

    /// Serializes the database into `path` (overwritten).
    void save_to(const std::string& path) const;

    sqlite3* handle() const noexcept { return db_; }

private:
    sqlite3* db_ = nullptr;
};

/// SQL literal rendering: strings single-quoted with '' escaping, NULL as NULL.
std::string render_literal(const Value& v);

}  // namespace jolt
