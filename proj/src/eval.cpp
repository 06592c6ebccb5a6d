#include "jolt/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "jolt/error.hpp"
#include "jolt/sql.hpp"

namespace jolt {

namespace {

void check_lengths(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) {
        throw Error(ErrorCode::LengthMismatch, std::to_string(scores.size()) + " scores for " + std::to_string(labels.size()) + " labels");
    }
}

}  // namespace

PrecisionRecall precision_recall(const std::vector<double>& scores, const std::vector<int>& labels, double threshold) {
    check_lengths(scores, labels);
    if (scores.empty()) throw Error(ErrorCode::LengthMismatch, "no scores");
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool pred = scores[i] > threshold;
        if (pred && labels[i]) ++tp;
        else if (pred) ++fp;
        else if (labels[i]) ++fn;
    }
    PrecisionRecall pr;
    if (tp + fp) pr.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    if (tp + fn) pr.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    return pr;
}

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_lengths(scores, labels);
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // Counted in half-pairs so ties stay integral.
    std::uint64_t twice_wins = 0, neg_below = 0, pos = 0, neg = 0;
    for (std::size_t g = 0; g < order.size();) {
        std::size_t e = g;
        std::uint64_t gp = 0, gn = 0;
        while (e < order.size() && scores[order[e]] == scores[order[g]]) {
            (labels[order[e]] ? gp : gn) += 1;
            ++e;
        }
        twice_wins += gp * (2 * neg_below + gn);
        neg_below += gn;
        pos += gp;
        neg += gn;
        g = e;
    }
    if (pos == 0 || neg == 0) throw Error(ErrorCode::DegenerateLabels, "roc_auc needs both classes");
    return static_cast<double>(twice_wins) / static_cast<double>(2 * pos * neg);
}

double pr_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_lengths(scores, labels);
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    double sum = 0;
    std::size_t tp = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (!labels[order[k]]) continue;
        ++tp;
        sum += static_cast<double>(tp) / static_cast<double>(k + 1);
    }
    if (tp == 0) throw Error(ErrorCode::DegenerateLabels, "pr_auc needs a positive");
    return sum / static_cast<double>(tp);
}

LinkMetrics link_metrics(const std::vector<std::vector<double>>& scores, const std::vector<std::vector<int>>& labels, double threshold,
                         bool macro) {
    if (scores.size() != labels.size()) throw Error(ErrorCode::LengthMismatch, "score and label lists differ in length");
    LinkMetrics m;
    if (!macro) {
        std::vector<double> s;
        std::vector<int> l;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            check_lengths(scores[i], labels[i]);
            s.insert(s.end(), scores[i].begin(), scores[i].end());
            l.insert(l.end(), labels[i].begin(), labels[i].end());
        }
        const auto pr = precision_recall(s, l, threshold);
        m.precision = pr.precision;
        m.recall = pr.recall;
        const bool has_pos = std::count(l.begin(), l.end(), 1) > 0;
        const bool has_neg = std::count(l.begin(), l.end(), 0) > 0;
        m.roc_auc = has_pos && has_neg ? roc_auc(s, l) : 0.0;
        m.pr_auc = has_pos ? pr_auc(s, l) : 0.0;
        return m;
    }
    std::size_t n_roc = 0, n_pr = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const auto pr = precision_recall(scores[i], labels[i], threshold);
        m.precision += pr.precision;
        m.recall += pr.recall;
        const auto pos = std::count(labels[i].begin(), labels[i].end(), 1);
        if (pos > 0) {
            m.pr_auc += pr_auc(scores[i], labels[i]);
            ++n_pr;
        }
        if (pos > 0 && static_cast<std::size_t>(pos) < labels[i].size()) {
            m.roc_auc += roc_auc(scores[i], labels[i]);
            ++n_roc;
        }
    }
    if (!scores.empty()) {
        m.precision /= static_cast<double>(scores.size());
        m.recall /= static_cast<double>(scores.size());
    }
    if (n_roc) m.roc_auc /= static_cast<double>(n_roc);
    if (n_pr) m.pr_auc /= static_cast<double>(n_pr);
    return m;
}

const char* to_string(ExVerdict v) noexcept {
    switch (v) {
        case ExVerdict::Match: return "match";
        case ExVerdict::Mismatch: return "mismatch";
        case ExVerdict::PredError: return "pred_error";
        case ExVerdict::GoldError: return "gold_error";
    }
    return "mismatch";
}

namespace {

std::optional<double> as_number(const Value& v) {
    if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
    if (const auto* d = std::get_if<double>(&v)) return *d;
    return std::nullopt;
}

bool values_equal(const Value& a, const Value& b) {
    const auto na = as_number(a), nb = as_number(b);
    if (na && nb) {
        if (*na == *nb) return true;
        return std::fabs(*na - *nb) <= 1e-6 * std::max(std::fabs(*na), std::fabs(*nb));
    }
    return a == b;
}

/// Null < number < text; numbers by value.
bool value_less(const Value& a, const Value& b) {
    auto rank = [](const Value& v) { return std::holds_alternative<std::monostate>(v) ? 0 : std::holds_alternative<std::string>(v) ? 2 : 1; };
    const int ra = rank(a), rb = rank(b);
    if (ra != rb) return ra < rb;
    if (ra == 1) return *as_number(a) < *as_number(b);
    if (ra == 2) return std::get<std::string>(a) < std::get<std::string>(b);
    return false;
}

bool rows_equal(const std::vector<Value>& a, const std::vector<Value>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!values_equal(a[i], b[i])) return false;
    }
    return true;
}

bool row_less(const std::vector<Value>& a, const std::vector<Value>& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), value_less);
}

bool gold_is_ordered(const std::string& gold_sql) {
    try {
        return sql::has_top_level_order_by(sql::parse_sql(gold_sql));
    } catch (const Error&) {
        return false;
    }
}

}  // namespace

ExVerdict execution_match(const Database& db, const std::string& pred_sql, const std::string& gold_sql, std::chrono::milliseconds timeout) {
    ResultSet gold, pred;
    try {
        gold = db.query(gold_sql, timeout);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::DbUnavailable) throw;
        return ExVerdict::GoldError;
    }
    try {
        pred = db.query(pred_sql, timeout);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::DbUnavailable) throw;
        return ExVerdict::PredError;
    }
    if (gold.rows.size() != pred.rows.size()) return ExVerdict::Mismatch;
    if (!gold_is_ordered(gold_sql)) {
        std::sort(gold.rows.begin(), gold.rows.end(), row_less);
        std::sort(pred.rows.begin(), pred.rows.end(), row_less);
    }
    for (std::size_t i = 0; i < gold.rows.size(); ++i) {
        if (!rows_equal(gold.rows[i], pred.rows[i])) return ExVerdict::Mismatch;
    }
    return ExVerdict::Match;
}

ExReport summarize_ex(const std::vector<ExVerdict>& verdicts) {
    ExReport r;
    r.verdicts = verdicts;
    for (auto v : verdicts) {
        if (v == ExVerdict::Match) ++r.matches;
        if (v == ExVerdict::GoldError) ++r.gold_errors;
    }
    const std::size_t scored = verdicts.size() - r.gold_errors;
    r.ex = scored ? static_cast<double>(r.matches) / static_cast<double>(scored) : 0.0;
    return r;
}

Database open_example_db(const std::string& db_dir, const std::string& db_id) {
    return Database(db_dir + "/" + db_id + ".sqlite", Database::Mode::ReadOnly);
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
    threads = std::max<std::size_t>(1, std::min(threads, n));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mu);
                    if (!failure) failure = std::current_exception();
                    next = n;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

namespace {

Encoding inference_encoding(const TrainingExample& ex, const Vocab& vocab, std::size_t max_len) {
    return encode(ex.prefix, ex.schema, "", vocab, max_len);
}

}  // namespace

EvalResult evaluate(const ModelParams<float>& params, const Vocab& vocab, const std::vector<TrainingExample>& dev, const std::string& db_dir,
                    const EvalOptions& opts) {
    EvalResult r;
    r.examples.resize(dev.size());
    parallel_for(dev.size(), opts.threads, [&](std::size_t i) {
        const auto& ex = dev[i];
        const auto enc = inference_encoding(ex, vocab, params.config.max_len);
        const auto inf = infer_encoded(params, vocab, enc, opts.threshold, opts.max_new_tokens);
        const Database db = open_example_db(db_dir, ex.db_id);
        r.examples[i] = {ex.id, inf.link.scores, inf.link.predicted, inf.sql, execution_match(db, inf.sql, ex.gold_sql)};
    });
    std::vector<std::vector<double>> scores;
    std::vector<std::vector<int>> labels;
    std::vector<ExVerdict> verdicts;
    for (std::size_t i = 0; i < dev.size(); ++i) {
        scores.push_back(r.examples[i].scores);
        labels.push_back(dev[i].label);
        verdicts.push_back(r.examples[i].verdict);
    }
    r.link = link_metrics(scores, labels, opts.threshold, opts.macro);
    r.ex = summarize_ex(verdicts);
    return r;
}

nlohmann::ordered_json metrics_json(const EvalResult& r) {
    std::size_t pred_errors = 0;
    for (auto v : r.ex.verdicts) pred_errors += v == ExVerdict::PredError;
    nlohmann::ordered_json j;
    j["examples"] = r.ex.verdicts.size();
    j["precision"] = r.link.precision;
    j["recall"] = r.link.recall;
    j["roc_auc"] = r.link.roc_auc;
    j["pr_auc"] = r.link.pr_auc;
    j["ex"] = r.ex.ex;
    j["matches"] = r.ex.matches;
    j["pred_errors"] = pred_errors;
    j["gold_errors"] = r.ex.gold_errors;
    nlohmann::ordered_json per = nlohmann::ordered_json::array();
    for (const auto& e : r.examples) per.push_back({{"id", e.id}, {"sql", e.sql}, {"verdict", to_string(e.verdict)}});
    j["per_example"] = std::move(per);
    return j;
}

std::vector<SweepRow> threshold_sweep(const ModelParams<float>& params, const Vocab& vocab, const std::vector<TrainingExample>& dev,
                                      const std::string& db_dir, const std::vector<double>& thresholds, const EvalOptions& opts) {
    const std::size_t nt = thresholds.size();
    std::vector<std::vector<double>> scores(dev.size());
    std::vector<std::vector<ExVerdict>> verdicts(dev.size(), std::vector<ExVerdict>(nt));
    parallel_for(dev.size(), opts.threads, [&](std::size_t i) {
        const auto& ex = dev[i];
        const auto enc = inference_encoding(ex, vocab, params.config.max_len);
        const auto base = link_schema(params, enc, 1.0);
        scores[i] = base.scores;
        const Database db = open_example_db(db_dir, ex.db_id);
        std::map<std::vector<std::size_t>, ExVerdict> memo;
        for (std::size_t t = 0; t < nt; ++t) {
            LinkPrediction link{base.scores, {}};
            for (std::size_t c = 0; c < link.scores.size(); ++c) {
                if (link.scores[c] > thresholds[t]) link.predicted.push_back(c);
            }
            auto it = memo.find(link.predicted);
            if (it == memo.end()) {
                const auto gen = generate_from_prediction(params, vocab, enc, link, opts.max_new_tokens);
                it = memo.emplace(link.predicted, execution_match(db, gen.sql, ex.gold_sql)).first;
            }
            verdicts[i][t] = it->second;
        }
    });
    std::vector<std::vector<int>> labels;
    for (const auto& ex : dev) labels.push_back(ex.label);
    std::vector<SweepRow> rows;
    for (std::size_t t = 0; t < nt; ++t) {
        const auto m = link_metrics(scores, labels, thresholds[t], opts.macro);
        std::vector<ExVerdict> v;
        for (const auto& per : verdicts) v.push_back(per[t]);
        rows.push_back({thresholds[t], m.precision, m.recall, summarize_ex(v).ex});
    }
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    os << "threshold,precision,recall,ex\n" << std::setprecision(17);
    for (const auto& r : rows) os << r.threshold << ',' << r.precision << ',' << r.recall << ',' << r.ex << '\n';
    return os.str();
}

std::string sweep_svg(const std::vector<SweepRow>& rows) {
    constexpr double W = 480, H = 320, L = 50, R = 110, T = 20, B = 40;
    const double pw = W - L - R, ph = H - T - B;
    auto x = [&](double t) { return L + t * pw; };
    auto y = [&](double v) { return T + (1.0 - v) * ph; };
    std::vector<SweepRow> sorted = rows;
    std::sort(sorted.begin(), sorted.end(), [](const SweepRow& a, const SweepRow& b) { return a.threshold < b.threshold; });
    std::ostringstream os;
    os << std::fixed << std::setprecision(2);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << y(0) << "\" x2=\"" << x(1) << "\" y2=\"" << y(0) << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << y(0) << "\" x2=\"" << L << "\" y2=\"" << y(1) << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double v = i / 5.0;
        os << "<text x=\"" << x(v) << "\" y=\"" << y(0) + 14 << "\" text-anchor=\"middle\">" << v << "</text>\n";
        os << "<text x=\"" << L - 6 << "\" y=\"" << y(v) + 4 << "\" text-anchor=\"end\">" << v << "</text>\n";
    }
    os << "<text x=\"" << x(0.5) << "\" y=\"" << H - 6 << "\" text-anchor=\"middle\">threshold</text>\n";
    const struct {
        const char* name;
        const char* colour;
        double SweepRow::*field;
    } series[] = {{"precision", "#1f77b4", &SweepRow::precision}, {"recall", "#d62728", &SweepRow::recall}, {"EX", "#2ca02c", &SweepRow::ex}};
    int legend = 0;
    for (const auto& s : series) {
        os << "<polyline fill=\"none\" stroke=\"" << s.colour << "\" stroke-width=\"2\" points=\"";
        for (const auto& r : sorted) os << x(r.threshold) << ',' << y(r.*s.field) << ' ';
        os << "\"/>\n";
        for (const auto& r : sorted) {
            os << "<circle cx=\"" << x(r.threshold) << "\" cy=\"" << y(r.*s.field) << "\" r=\"3\" fill=\"" << s.colour << "\"/>\n";
        }
        const double ly = T + 10 + 16 * legend++;
        os << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 30 << "\" y2=\"" << ly << "\" stroke=\"" << s.colour
           << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << W - R + 36 << "\" y=\"" << ly + 4 << "\">" << s.name << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace jolt
