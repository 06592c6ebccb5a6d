#include <array>
#include <cctype>
#include <string>

#include "jolt/error.hpp"
#include "jolt/sql.hpp"

namespace jolt::sql {
namespace {

enum class Tok { Ident, Keyword, Number, String, Op, End };

struct Token {
    Tok type = Tok::End;
    /// Identifiers and keywords lowercase; literals verbatim including quotes.
    std::string text;
    std::size_t offset = 0;
};

constexpr std::array kKeywords = {
    "select", "from",  "where",  "group", "by",     "having",    "order", "limit", "offset", "join",   "inner",
    "left",   "right", "full",   "outer", "cross",  "natural",   "on",    "using", "as",     "and",    "or",
    "not",    "in",    "is",     "null",  "like",   "glob",      "between", "exists", "union", "intersect",
    "except", "all",   "distinct", "case", "when",  "then",      "else",  "end",   "cast",   "asc",    "desc",
    "with",   "over",  "escape",
};

bool is_keyword(const std::string& lower) {
    for (const char* k : kKeywords) {
        if (lower == k) return true;
    }
    return false;
}

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || static_cast<unsigned char>(c) >= 0x80; }
bool ident_char(char c) { return ident_start(c) || std::isdigit(static_cast<unsigned char>(c)); }

std::vector<Token> lex(std::string_view s) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < s.size()) {
        const char c = s[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        if (c == '-' && i + 1 < s.size() && s[i + 1] == '-') {
            while (i < s.size() && s[i] != '\n') ++i;
            continue;
        }
        const std::size_t start = i;
        if (ident_start(c)) {
            while (i < s.size() && ident_char(s[i])) ++i;
            std::string word = to_lower(s.substr(start, i - start));
            out.push_back({is_keyword(word) ? Tok::Keyword : Tok::Ident, std::move(word), start});
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
            while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
            if (i < s.size() && s[i] == '.') {
                ++i;
                while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
            }
            if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
                std::size_t j = i + 1;
                if (j < s.size() && (s[j] == '+' || s[j] == '-')) ++j;
                if (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) {
                    i = j;
                    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
                }
            }
            out.push_back({Tok::Number, std::string(s.substr(start, i - start)), start});
            continue;
        }
        if (c == '\'' || c == '"') {
            ++i;
            while (true) {
                if (i >= s.size()) throw SyntaxError(start, "unterminated string literal");
                if (s[i] == c) {
                    if (i + 1 < s.size() && s[i + 1] == c) {
                        i += 2;
                        continue;
                    }
                    ++i;
                    break;
                }
                ++i;
            }
            out.push_back({Tok::String, std::string(s.substr(start, i - start)), start});
            continue;
        }
        if (c == '`' || c == '[') {
            const char close = c == '`' ? '`' : ']';
            const std::size_t end = s.find(close, i + 1);
            if (end == std::string_view::npos) throw SyntaxError(start, "unterminated quoted identifier");
            out.push_back({Tok::Ident, to_lower(s.substr(i + 1, end - i - 1)), start});
            i = end + 1;
            continue;
        }
        static constexpr std::array<std::string_view, 7> two = {"<=", ">=", "<>", "!=", "==", "||", "<<"};
        bool matched = false;
        for (auto op : two) {
            if (s.substr(i, 2) == op) {
                out.push_back({Tok::Op, std::string(op), start});
                i += 2;
                matched = true;
                break;
            }
        }
        if (matched) continue;
        if (std::string_view("(),.;*=<>+-/%").find(c) != std::string_view::npos) {
            out.push_back({Tok::Op, std::string(1, c), start});
            ++i;
            continue;
        }
        throw SyntaxError(start, std::string("unexpected character '") + c + "'");
    }
    out.push_back({Tok::End, "", s.size()});
    return out;
}

class Parser {
public:
    explicit Parser(std::string_view text) : tokens_(lex(text)) {}

    SqlAst parse() {
        if (peek_kw("with")) throw Error(ErrorCode::Unsupported, "common table expressions (WITH) are not supported");
        auto q = std::make_shared<Query>(query());
        accept_op(";");
        if (cur().type != Tok::End) fail("unexpected trailing input '" + cur().text + "'");
        SqlAst ast;
        ast.root = std::move(q);
        ast.reference_count = next_ref_;
        return ast;
    }

private:
    const Token& cur() const { return tokens_[pos_]; }
    const Token& ahead(std::size_t k) const { return tokens_[std::min(pos_ + k, tokens_.size() - 1)]; }
    [[noreturn]] void fail(const std::string& what) const { throw SyntaxError(cur().offset, what); }

    bool peek_kw(std::string_view kw) const { return cur().type == Tok::Keyword && cur().text == kw; }
    bool peek_op(std::string_view op) const { return cur().type == Tok::Op && cur().text == op; }
    bool accept_kw(std::string_view kw) {
        if (!peek_kw(kw)) return false;
        ++pos_;
        return true;
    }
    bool accept_op(std::string_view op) {
        if (!peek_op(op)) return false;
        ++pos_;
        return true;
    }
    void expect_kw(std::string_view kw) {
        if (!accept_kw(kw)) fail("expected " + to_upper(kw) + ", got '" + cur().text + "'");
    }
    void expect_op(std::string_view op) {
        if (!accept_op(op)) fail("expected '" + std::string(op) + "', got '" + cur().text + "'");
    }
    static std::string to_upper(std::string_view s) {
        std::string out(s);
        for (auto& ch : out) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
        return out;
    }
    std::string identifier(const char* what) {
        if (cur().type != Tok::Ident) fail(std::string("expected ") + what + ", got '" + cur().text + "'");
        return tokens_[pos_++].text;
    }

    Query query() {
        Query q;
        q.selects.push_back(select_core());
        while (true) {
            if (accept_kw("union")) {
                q.set_ops.push_back(accept_kw("all") ? SetOp::UnionAll : SetOp::Union);
            } else if (accept_kw("intersect")) {
                q.set_ops.push_back(SetOp::Intersect);
            } else if (accept_kw("except")) {
                q.set_ops.push_back(SetOp::Except);
            } else {
                break;
            }
            q.selects.push_back(select_core());
        }
        if (accept_kw("order")) {
            expect_kw("by");
            do {
                OrderItem item{expr(), false};
                if (accept_kw("desc")) {
                    item.descending = true;
                } else {
                    accept_kw("asc");
                }
                q.order_by.push_back(std::move(item));
            } while (accept_op(","));
        }
        if (accept_kw("limit")) {
            q.limit = expr();
            if (accept_kw("offset")) {
                q.offset = expr();
            } else if (accept_op(",")) {
                // LIMIT offset, count
                q.offset = std::move(q.limit);
                q.limit = expr();
            }
        }
        return q;
    }

    Select select_core() {
        if (peek_op("(")) {
            // Parenthesised compound member: SELECT ... UNION (SELECT ...)
            if (ahead(1).type == Tok::Keyword && ahead(1).text == "select") {
                ++pos_;
                Query inner = query();
                expect_op(")");
                if (inner.selects.size() != 1 || !inner.order_by.empty() || inner.limit) {
                    fail("parenthesised compound members with ORDER BY/LIMIT are not supported");
                }
                return std::move(inner.selects.front());
            }
        }
        if (!peek_kw("select")) fail("expected SELECT, got '" + cur().text + "'");
        ++pos_;
        Select s;
        if (accept_kw("distinct")) {
            s.distinct = true;
        } else {
            accept_kw("all");
        }
        do {
            s.items.push_back(select_item());
        } while (accept_op(","));
        if (accept_kw("from")) from_clause(s);
        if (accept_kw("where")) s.where = expr();
        if (accept_kw("group")) {
            expect_kw("by");
            do {
                s.group_by.push_back(expr());
            } while (accept_op(","));
        }
        if (accept_kw("having")) s.having = expr();
        return s;
    }

    SelectItem select_item() {
        SelectItem item;
        item.expr = expr();
        if (accept_kw("as")) {
            if (cur().type == Tok::String) {
                item.alias = to_lower(unquote(tokens_[pos_++].text));
            } else {
                item.alias = identifier("alias");
            }
        } else if (cur().type == Tok::Ident) {
            item.alias = tokens_[pos_++].text;
        }
        return item;
    }

    static std::string unquote(const std::string& lit) {
        if (lit.size() >= 2 && (lit.front() == '\'' || lit.front() == '"')) return lit.substr(1, lit.size() - 2);
        return lit;
    }

    void from_clause(Select& s) {
        s.from.push_back(table_ref(JoinKind::None));
        while (true) {
            JoinKind kind;
            if (accept_op(",")) {
                kind = JoinKind::Comma;
            } else if (accept_kw("join")) {
                kind = JoinKind::Inner;
            } else if (accept_kw("inner")) {
                expect_kw("join");
                kind = JoinKind::Inner;
            } else if (peek_kw("left") || peek_kw("right") || peek_kw("full")) {
                kind = peek_kw("left") ? JoinKind::Left : peek_kw("right") ? JoinKind::Right : JoinKind::Full;
                ++pos_;
                accept_kw("outer");
                expect_kw("join");
            } else if (accept_kw("cross")) {
                expect_kw("join");
                kind = JoinKind::Cross;
            } else if (peek_kw("natural")) {
                fail("NATURAL JOIN is not supported");
            } else {
                break;
            }
            TableRef ref = table_ref(kind);
            if (kind != JoinKind::Comma && kind != JoinKind::Cross) {
                if (accept_kw("on")) {
                    ref.on = expr();
                } else if (accept_kw("using")) {
                    expect_op("(");
                    do {
                        ref.using_columns.push_back(identifier("column name"));
                        ref.using_ref_ids.push_back(next_ref_++);
                    } while (accept_op(","));
                    expect_op(")");
                }
            }
            s.from.push_back(std::move(ref));
        }
    }

    TableRef table_ref(JoinKind kind) {
        TableRef ref;
        ref.join = kind;
        ref.offset = cur().offset;
        if (accept_op("(")) {
            if (!peek_kw("select")) fail("expected subquery after '('");
            ref.derived = std::make_shared<Query>(query());
            expect_op(")");
        } else {
            ref.table = identifier("table name");
        }
        if (accept_kw("as")) {
            ref.alias = identifier("table alias");
        } else if (cur().type == Tok::Ident) {
            ref.alias = tokens_[pos_++].text;
        }
        return ref;
    }

    // Precedence, loosest first: OR, AND, NOT, comparison, additive, multiplicative, concat, unary.
    Expr expr() { return or_expr(); }

    Expr binary(std::string op, Expr lhs, Expr rhs, std::size_t offset) {
        Expr e;
        e.kind = ExprKind::Binary;
        e.name = std::move(op);
        e.offset = offset;
        e.args.push_back(std::move(lhs));
        e.args.push_back(std::move(rhs));
        return e;
    }

    Expr or_expr() {
        Expr lhs = and_expr();
        while (peek_kw("or")) {
            const auto off = cur().offset;
            ++pos_;
            lhs = binary("OR", std::move(lhs), and_expr(), off);
        }
        return lhs;
    }

    Expr and_expr() {
        Expr lhs = not_expr();
        while (peek_kw("and")) {
            const auto off = cur().offset;
            ++pos_;
            lhs = binary("AND", std::move(lhs), not_expr(), off);
        }
        return lhs;
    }

    Expr not_expr() {
        if (peek_kw("not") && !(ahead(1).type == Tok::Keyword && ahead(1).text == "exists")) {
            Expr e;
            e.kind = ExprKind::Unary;
            e.name = "NOT";
            e.offset = cur().offset;
            ++pos_;
            e.args.push_back(not_expr());
            return e;
        }
        return comparison();
    }

    Expr comparison() {
        Expr lhs = additive();
        while (true) {
            const auto off = cur().offset;
            if (cur().type == Tok::Op &&
                (cur().text == "=" || cur().text == "==" || cur().text == "!=" || cur().text == "<>" || cur().text == "<" ||
                 cur().text == "<=" || cur().text == ">" || cur().text == ">=")) {
                std::string op = tokens_[pos_++].text;
                lhs = binary(std::move(op), std::move(lhs), additive(), off);
                continue;
            }
            if (accept_kw("is")) {
                Expr e;
                e.offset = off;
                e.negated = accept_kw("not");
                if (accept_kw("null")) {
                    e.kind = ExprKind::IsNull;
                    e.args.push_back(std::move(lhs));
                } else {
                    e = binary(e.negated ? "IS NOT" : "IS", std::move(lhs), additive(), off);
                }
                lhs = std::move(e);
                continue;
            }
            bool negated = false;
            if (peek_kw("not") && ahead(1).type == Tok::Keyword &&
                (ahead(1).text == "in" || ahead(1).text == "like" || ahead(1).text == "between" || ahead(1).text == "glob")) {
                ++pos_;
                negated = true;
            }
            if (accept_kw("in")) {
                Expr e;
                e.offset = off;
                e.negated = negated;
                expect_op("(");
                e.args.push_back(std::move(lhs));
                if (peek_kw("select")) {
                    e.kind = ExprKind::InSubquery;
                    e.subquery = std::make_shared<Query>(query());
                } else {
                    e.kind = ExprKind::InList;
                    if (!peek_op(")")) {
                        do {
                            e.args.push_back(expr());
                        } while (accept_op(","));
                    }
                }
                expect_op(")");
                lhs = std::move(e);
                continue;
            }
            if (peek_kw("like") || peek_kw("glob")) {
                std::string op = cur().text == "like" ? "LIKE" : "GLOB";
                ++pos_;
                Expr e = binary(negated ? "NOT " + op : op, std::move(lhs), additive(), off);
                if (accept_kw("escape")) e.args.push_back(additive());
                lhs = std::move(e);
                continue;
            }
            if (accept_kw("between")) {
                Expr e;
                e.kind = ExprKind::Between;
                e.offset = off;
                e.negated = negated;
                e.args.push_back(std::move(lhs));
                e.args.push_back(additive());
                expect_kw("and");
                e.args.push_back(additive());
                lhs = std::move(e);
                continue;
            }
            if (negated) fail("expected IN, LIKE or BETWEEN after NOT");
            return lhs;
        }
    }

    Expr additive() {
        Expr lhs = multiplicative();
        while (peek_op("+") || peek_op("-")) {
            const auto off = cur().offset;
            std::string op = tokens_[pos_++].text;
            lhs = binary(std::move(op), std::move(lhs), multiplicative(), off);
        }
        return lhs;
    }

    Expr multiplicative() {
        Expr lhs = concat();
        while (peek_op("*") || peek_op("/") || peek_op("%")) {
            const auto off = cur().offset;
            std::string op = tokens_[pos_++].text;
            lhs = binary(std::move(op), std::move(lhs), concat(), off);
        }
        return lhs;
    }

    Expr concat() {
        Expr lhs = unary();
        while (peek_op("||")) {
            const auto off = cur().offset;
            ++pos_;
            lhs = binary("||", std::move(lhs), unary(), off);
        }
        return lhs;
    }

    Expr unary() {
        if (peek_op("-") || peek_op("+")) {
            Expr e;
            e.kind = ExprKind::Unary;
            e.name = cur().text;
            e.offset = cur().offset;
            ++pos_;
            e.args.push_back(unary());
            return e;
        }
        return primary();
    }

    Expr primary() {
        const Token& t = cur();
        Expr e;
        e.offset = t.offset;
        switch (t.type) {
            case Tok::Number:
            case Tok::String:
                e.kind = ExprKind::Literal;
                e.name = t.text;
                ++pos_;
                return e;
            case Tok::Op:
                if (t.text == "(") {
                    ++pos_;
                    if (peek_kw("select")) {
                        e.kind = ExprKind::Subquery;
                        e.subquery = std::make_shared<Query>(query());
                    } else {
                        e = expr();
                    }
                    expect_op(")");
                    return e;
                }
                if (t.text == "*") {
                    ++pos_;
                    e.kind = ExprKind::Star;
                    e.ref_id = next_ref_++;
                    return e;
                }
                break;
            case Tok::Keyword:
                if (t.text == "null") {
                    ++pos_;
                    e.kind = ExprKind::Literal;
                    e.name = "NULL";
                    return e;
                }
                if (t.text == "exists" || t.text == "not") {
                    e.negated = accept_kw("not");
                    expect_kw("exists");
                    expect_op("(");
                    e.kind = ExprKind::Exists;
                    e.subquery = std::make_shared<Query>(query());
                    expect_op(")");
                    return e;
                }
                if (t.text == "case") return case_expr();
                if (t.text == "cast") {
                    ++pos_;
                    expect_op("(");
                    e.kind = ExprKind::Cast;
                    e.args.push_back(expr());
                    expect_kw("as");
                    e.name = identifier("type name");
                    expect_op(")");
                    return e;
                }
                break;
            case Tok::Ident: {
                std::string name = t.text;
                ++pos_;
                if (accept_op("(")) return function_call(std::move(name), e.offset);
                if (accept_op(".")) {
                    if (accept_op("*")) {
                        e.kind = ExprKind::Star;
                        e.qualifier = std::move(name);
                        e.ref_id = next_ref_++;
                        return e;
                    }
                    e.kind = ExprKind::Column;
                    e.qualifier = std::move(name);
                    e.name = identifier("column name");
                    e.ref_id = next_ref_++;
                    return e;
                }
                e.kind = ExprKind::Column;
                e.name = std::move(name);
                e.ref_id = next_ref_++;
                return e;
            }
            case Tok::End:
                break;
        }
        fail("unexpected '" + t.text + "' in expression");
    }

    Expr function_call(std::string name, std::size_t offset) {
        Expr e;
        e.kind = ExprKind::Function;
        e.name = std::move(name);
        e.offset = offset;
        if (accept_op("*")) {
            e.star_arg = true;
        } else if (!peek_op(")")) {
            e.distinct = accept_kw("distinct");
            do {
                e.args.push_back(expr());
            } while (accept_op(","));
        }
        expect_op(")");
        if (peek_kw("over")) throw Error(ErrorCode::Unsupported, "window functions (OVER) are not supported");
        return e;
    }

    Expr case_expr() {
        Expr e;
        e.kind = ExprKind::Case;
        e.offset = cur().offset;
        expect_kw("case");
        if (!peek_kw("when")) {
            e.has_operand = true;
            e.args.push_back(expr());
        }
        if (!peek_kw("when")) fail("expected WHEN in CASE");
        while (accept_kw("when")) {
            e.args.push_back(expr());
            expect_kw("then");
            e.args.push_back(expr());
        }
        if (accept_kw("else")) {
            e.has_else = true;
            e.args.push_back(expr());
        }
        expect_kw("end");
        return e;
    }

    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
    int next_ref_ = 0;
};

}  // namespace

SqlAst parse_sql(std::string_view text) {
    bool blank = true;
    for (char c : text) {
        if (!std::isspace(static_cast<unsigned char>(c))) blank = false;
    }
    if (blank) throw SyntaxError(0, "empty statement");
    return Parser(text).parse();
}

bool has_top_level_order_by(const SqlAst& ast) { return ast.root && !ast.root->order_by.empty(); }

}  // namespace jolt::sql
