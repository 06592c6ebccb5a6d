#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "jolt/db.hpp"
#include "jolt/pipeline.hpp"

namespace jolt {

struct PrecisionRecall {
    double precision = 1.0;
    double recall = 1.0;
};

/// Scores above `threshold` count as predicted. P is 1 with no predictions, R is 1 with no positives.
PrecisionRecall precision_recall(const std::vector<double>& scores, const std::vector<int>& labels, double threshold);

/// Mann-Whitney: share of (positive, negative) pairs won by the positive, ties worth 1/2.
/// Throws DegenerateLabels unless both classes occur.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

/// Average precision with step interpolation. Order is descending score, ties by
/// ascending index. Throws DegenerateLabels without a positive.
double pr_auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct LinkMetrics {
    double precision = 0;
    double recall = 0;
    double roc_auc = 0;
    double pr_auc = 0;
};

/// Per-example scores and labels. Micro pools every column; macro averages
/// per-example values (AUCs over examples where they are defined).
LinkMetrics link_metrics(const std::vector<std::vector<double>>& scores, const std::vector<std::vector<int>>& labels, double threshold,
                         bool macro = false);

enum class ExVerdict { Match, Mismatch, PredError, GoldError };
const char* to_string(ExVerdict v) noexcept;

inline constexpr std::chrono::milliseconds kQueryTimeout{5000};

/// Executes both queries. Rows compare position-wise (numbers within relative
/// 1e-6); row order matters only when gold has a top-level ORDER BY.
ExVerdict execution_match(const Database& db, const std::string& pred_sql, const std::string& gold_sql,
                          std::chrono::milliseconds timeout = kQueryTimeout);

struct ExReport {
    std::vector<ExVerdict> verdicts;
    std::size_t matches = 0;
    std::size_t gold_errors = 0;
    /// matches / (total - gold_errors); 0 when nothing is scorable.
    double ex = 0;
};

ExReport summarize_ex(const std::vector<ExVerdict>& verdicts);

/// Opens `<dir>/<db_id>.sqlite` read-only; throws DbUnavailable.
Database open_example_db(const std::string& db_dir, const std::string& db_id);

struct EvalOptions {
    double threshold = 0.05;
    std::size_t max_new_tokens = 64;
    bool macro = false;
    std::size_t threads = 1;
};

struct ExampleResult {
    std::string id;
    std::vector<double> scores;
    std::vector<std::size_t> predicted;
    std::string sql;
    ExVerdict verdict = ExVerdict::Mismatch;
};

struct EvalResult {
    LinkMetrics link;
    ExReport ex;
    std::vector<ExampleResult> examples;
};

/// Link, prune, generate and execute every dev example (tokenized with the model's vocab).
EvalResult evaluate(const ModelParams<float>& params, const Vocab& vocab, const std::vector<TrainingExample>& dev, const std::string& db_dir,
                    const EvalOptions& opts = {});

/// Metrics without per-example detail or timings; stable across identical runs.
nlohmann::ordered_json metrics_json(const EvalResult& r);

inline const std::vector<double> kSweepThresholds = {0.5, 0.4, 0.3, 0.2, 0.1, 0.05, 0.01};

struct SweepRow {
    double threshold = 0;
    double precision = 0;
    double recall = 0;
    double ex = 0;
};

/// link -> prune -> generate -> EX at each threshold. Linking runs once per
/// example; generation is shared between thresholds that predict the same set.
std::vector<SweepRow> threshold_sweep(const ModelParams<float>& params, const Vocab& vocab, const std::vector<TrainingExample>& dev,
                                      const std::string& db_dir, const std::vector<double>& thresholds = kSweepThresholds,
                                      const EvalOptions& opts = {});

std::string sweep_csv(const std::vector<SweepRow>& rows);
/// P, R and EX against threshold on a shared [0, 1] axis.
std::string sweep_svg(const std::vector<SweepRow>& rows);

/// Runs fn(i) for i in [0, n) on up to `threads` workers; rethrows the first failure.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace jolt
