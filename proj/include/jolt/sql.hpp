#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "jolt/schema.hpp"

/// SQL parsing, scope resolution and ground-truth link extraction for a
/// SQLite-flavored subset: SELECT / FROM / JOIN..ON|USING / WHERE / GROUP BY /
/// HAVING / ORDER BY / LIMIT, set operations, and scalar, EXISTS and IN
/// subqueries. CTEs and window functions are rejected.
namespace jolt::sql {

struct Query;

enum class ExprKind {
    Column,       // [qualifier.]name
    Star,         // * or qualifier.*
    Literal,      // number, string, NULL
    Unary,        // name = operator ("-", "+", "NOT")
    Binary,       // name = operator
    Function,     // name(args...); star_arg for COUNT(*)
    Subquery,     // scalar (SELECT ...)
    Exists,       // [NOT] EXISTS (SELECT ...)
    InList,       // args[0] [NOT] IN (args[1..])
    InSubquery,   // args[0] [NOT] IN (SELECT ...)
    Between,      // args[0] [NOT] BETWEEN args[1] AND args[2]
    IsNull,       // args[0] IS [NOT] NULL
    Case,         // args: [operand?] (when, then)* [else]; see has_operand / has_else
    Cast,         // CAST(args[0] AS name)
};

struct Expr {
    ExprKind kind = ExprKind::Literal;
    /// Column name, operator, function name, literal text or cast type.
    std::string name;
    /// Table or alias qualifier for Column / Star, lowercase.
    std::string qualifier;
    std::vector<Expr> args;
    std::shared_ptr<Query> subquery;
    bool negated = false;
    bool distinct = false;
    bool star_arg = false;
    bool has_operand = false;
    bool has_else = false;
    /// Index into ResolvedAst::bindings for Column and Star nodes; -1 otherwise.
    int ref_id = -1;
    std::size_t offset = 0;
};

enum class JoinKind { None, Comma, Inner, Left, Right, Full, Cross };

struct TableRef {
    /// Physical table name (lowercase); empty for derived tables.
    std::string table;
    /// Alias (lowercase); empty when none was written.
    std::string alias;
    std::shared_ptr<Query> derived;
    /// How this source joins the ones before it. None for the first source.
    JoinKind join = JoinKind::None;
    std::optional<Expr> on;
    std::vector<std::string> using_columns;
    /// ref ids allocated for each USING column (one per column).
    std::vector<int> using_ref_ids;
    std::size_t offset = 0;

    /// Name the source is referred to by inside its scope.
    const std::string& visible_name() const { return alias.empty() ? table : alias; }
};

struct SelectItem {
    Expr expr;
    std::string alias;
};

struct Select {
    bool distinct = false;
    std::vector<SelectItem> items;
    std::vector<TableRef> from;
    std::optional<Expr> where;
    std::vector<Expr> group_by;
    std::optional<Expr> having;
};

enum class SetOp { Union, UnionAll, Intersect, Except };

struct OrderItem {
    Expr expr;
    bool descending = false;
};

/// One or more SELECT cores combined by set operations, with optional
/// trailing ORDER BY / LIMIT.
struct Query {
    std::vector<Select> selects;
    std::vector<SetOp> set_ops;  // size = selects.size() - 1
    std::vector<OrderItem> order_by;
    std::optional<Expr> limit;
    std::optional<Expr> offset;
};

struct SqlAst {
    std::shared_ptr<const Query> root;
    /// Number of Column / Star / USING reference slots allocated by the parser.
    int reference_count = 0;
};

/// Parses one statement. Throws SyntaxError with the byte offset of the
/// offending token, or Error(Unsupported) for CTEs and window functions.
SqlAst parse_sql(std::string_view text);

enum class BindingKind { Physical, Derived, SelectAlias };

struct ColumnBinding {
    BindingKind kind = BindingKind::Physical;
    /// Physical columns referenced: one for a column, several for a star, two or
    /// more for a USING column.
    std::vector<QualifiedColumn> columns;
};

/// Parsed query with every column reference bound to its source.
struct ResolvedAst {
    SqlAst ast;
    std::vector<ColumnBinding> bindings;

    const ColumnBinding& binding(const Expr& ref) const { return bindings.at(static_cast<std::size_t>(ref.ref_id)); }
};

/// Binds every column reference to a physical table, resolving aliases and
/// nested scopes innermost-first. Throws AmbiguousColumn, UnknownColumn or UnknownTable.
ResolvedAst resolve_scopes(const SqlAst& ast, const SchemaDocument& schema);

/// Union of all physical columns referenced anywhere in the query.
LinkSet extract_links(const ResolvedAst& resolved, const SchemaDocument& schema);

/// parse_sql + resolve_scopes + extract_links.
LinkSet extract_links(std::string_view sql, const SchemaDocument& schema);

/// True when the top-level query carries an ORDER BY.
bool has_top_level_order_by(const SqlAst& ast);

}  // namespace jolt::sql
