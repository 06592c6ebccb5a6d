#include <algorithm>

#include "jolt/error.hpp"
#include "jolt/sql.hpp"

namespace jolt::sql {
namespace {

/// A FROM-clause source visible inside one SELECT scope.
struct Source {
    std::string name;  // alias or table name
    const Table* table = nullptr;
    /// Output column names of a derived table.
    std::vector<std::string> derived_columns;

    bool defines(const std::string& column) const {
        if (table) return table->find_column(column) != nullptr;
        return std::find(derived_columns.begin(), derived_columns.end(), column) != derived_columns.end();
    }
};

struct Scope {
    const Scope* parent = nullptr;
    std::vector<Source> sources;
    std::vector<std::string> select_aliases;
};

class Resolver {
public:
    Resolver(const SchemaDocument& schema, std::vector<ColumnBinding>& bindings) : schema_(schema), bindings_(bindings) {}

    /// Resolves a query and returns the output column names of its first SELECT.
    std::vector<std::string> query(const Query& q, const Scope* parent) {
        std::vector<Scope> scopes;
        scopes.reserve(q.selects.size());
        for (const auto& s : q.selects) scopes.push_back(select(s, parent));
        for (const auto& item : q.order_by) expr(item.expr, scopes.front());
        if (q.limit) expr(*q.limit, scopes.front());
        if (q.offset) expr(*q.offset, scopes.front());
        return output_columns(q.selects.front(), scopes.front());
    }

private:
    Scope select(const Select& s, const Scope* parent) {
        Scope scope;
        scope.parent = parent;
        for (const auto& item : s.items) {
            if (!item.alias.empty()) scope.select_aliases.push_back(item.alias);
        }
        for (const auto& ref : s.from) {
            Source src;
            if (ref.derived) {
                src.derived_columns = query(*ref.derived, parent);
                src.name = ref.alias;
            } else {
                src.table = schema_.find_table(ref.table);
                if (!src.table) throw Error(ErrorCode::UnknownTable, "table '" + ref.table + "' not in schema");
                src.name = ref.visible_name();
            }
            if (!src.name.empty()) {
                for (const auto& other : scope.sources) {
                    if (other.name == src.name) throw SyntaxError(ref.offset, "duplicate table alias '" + src.name + "'");
                }
            }
            scope.sources.push_back(std::move(src));
        }
        // ON and USING see every source of the FROM clause.
        for (std::size_t i = 0; i < s.from.size(); ++i) {
            const auto& ref = s.from[i];
            if (ref.on) expr(*ref.on, scope);
            for (std::size_t u = 0; u < ref.using_columns.size(); ++u) {
                bind_using(ref.using_columns[u], ref.using_ref_ids[u], scope, i);
            }
        }
        for (const auto& item : s.items) expr(item.expr, scope);
        if (s.where) expr(*s.where, scope);
        for (const auto& g : s.group_by) expr(g, scope);
        if (s.having) expr(*s.having, scope);
        return scope;
    }

    std::vector<std::string> output_columns(const Select& s, const Scope& scope) const {
        std::vector<std::string> names;
        for (const auto& item : s.items) {
            if (!item.alias.empty()) {
                names.push_back(item.alias);
            } else if (item.expr.kind == ExprKind::Column) {
                names.push_back(item.expr.name);
            } else if (item.expr.kind == ExprKind::Star) {
                for (const auto& src : scope.sources) {
                    if (!item.expr.qualifier.empty() && src.name != item.expr.qualifier) continue;
                    if (src.table) {
                        for (const auto& c : src.table->columns) names.push_back(to_lower(c.name));
                    } else {
                        names.insert(names.end(), src.derived_columns.begin(), src.derived_columns.end());
                    }
                }
            }
        }
        return names;
    }

    void bind_using(const std::string& column, int ref_id, const Scope& scope, std::size_t right_index) {
        ColumnBinding b;
        b.kind = BindingKind::Physical;
        bool left_found = false;
        for (std::size_t i = 0; i <= right_index; ++i) {
            const Source& src = scope.sources[i];
            if (!src.defines(column)) continue;
            if (i < right_index) left_found = true;
            if (src.table) b.columns.emplace_back(src.table->name, column);
        }
        if (!left_found || !scope.sources[right_index].defines(column)) {
            throw Error(ErrorCode::UnknownColumn, "USING column '" + column + "' not defined on both sides");
        }
        if (b.columns.empty()) b.kind = BindingKind::Derived;
        set(ref_id, std::move(b));
    }

    void set(int ref_id, ColumnBinding b) { bindings_.at(static_cast<std::size_t>(ref_id)) = std::move(b); }

    static ColumnBinding bind_source(const Source& src, const std::string& column) {
        ColumnBinding b;
        if (src.table) {
            b.kind = BindingKind::Physical;
            b.columns.emplace_back(src.table->name, column);
        } else {
            b.kind = BindingKind::Derived;
        }
        return b;
    }

    void column(const Expr& e, const Scope& scope) {
        if (!e.qualifier.empty()) {
            for (const Scope* s = &scope; s; s = s->parent) {
                for (const auto& src : s->sources) {
                    if (src.name != e.qualifier) continue;
                    if (!src.defines(e.name)) {
                        throw Error(ErrorCode::UnknownColumn, "column '" + e.qualifier + "." + e.name + "' not found");
                    }
                    set(e.ref_id, bind_source(src, e.name));
                    return;
                }
            }
            throw Error(ErrorCode::UnknownTable, "no table or alias '" + e.qualifier + "' in scope");
        }
        for (const Scope* s = &scope; s; s = s->parent) {
            const Source* found = nullptr;
            for (const auto& src : s->sources) {
                if (!src.defines(e.name)) continue;
                if (found) throw Error(ErrorCode::AmbiguousColumn, "column '" + e.name + "' is defined by more than one table in scope");
                found = &src;
            }
            if (found) {
                set(e.ref_id, bind_source(*found, e.name));
                return;
            }
        }
        const auto& aliases = scope.select_aliases;
        if (std::find(aliases.begin(), aliases.end(), e.name) != aliases.end()) {
            ColumnBinding b;
            b.kind = BindingKind::SelectAlias;
            set(e.ref_id, std::move(b));
            return;
        }
        throw Error(ErrorCode::UnknownColumn, "column '" + e.name + "' not found in any table in scope");
    }

    void star(const Expr& e, const Scope& scope) {
        ColumnBinding b;
        b.kind = BindingKind::Physical;
        bool matched = false;
        for (const auto& src : scope.sources) {
            if (!e.qualifier.empty() && src.name != e.qualifier) continue;
            matched = true;
            if (!src.table) continue;
            for (const auto& c : src.table->columns) b.columns.emplace_back(src.table->name, c.name);
        }
        if (!e.qualifier.empty() && !matched) throw Error(ErrorCode::UnknownTable, "no table or alias '" + e.qualifier + "' in scope");
        set(e.ref_id, std::move(b));
    }

    void expr(const Expr& e, const Scope& scope) {
        switch (e.kind) {
            case ExprKind::Column:
                column(e, scope);
                break;
            case ExprKind::Star:
                star(e, scope);
                break;
            default:
                break;
        }
        for (const auto& a : e.args) expr(a, scope);
        if (e.subquery) query(*e.subquery, &scope);
    }

    const SchemaDocument& schema_;
    std::vector<ColumnBinding>& bindings_;
};

}  // namespace

ResolvedAst resolve_scopes(const SqlAst& ast, const SchemaDocument& schema) {
    ResolvedAst out;
    out.ast = ast;
    out.bindings.resize(static_cast<std::size_t>(ast.reference_count));
    Resolver(schema, out.bindings).query(*ast.root, nullptr);
    return out;
}

LinkSet extract_links(const ResolvedAst& resolved, const SchemaDocument& schema) {
    LinkSet links;
    for (const auto& b : resolved.bindings) {
        if (b.kind != BindingKind::Physical) continue;
        for (const auto& qc : b.columns) {
            const Table* t = schema.find_table(qc.table);
            if (!t || !t->find_column(qc.column)) throw Error(ErrorCode::UnknownColumn, "link " + qc.str() + " not in schema");
            links.insert(qc);
        }
    }
    return links;
}

LinkSet extract_links(std::string_view sql, const SchemaDocument& schema) {
    return extract_links(resolve_scopes(parse_sql(sql), schema), schema);
}

}  // namespace jolt::sql
