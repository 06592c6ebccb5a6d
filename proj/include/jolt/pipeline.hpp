#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "jolt/db.hpp"
#include "jolt/model.hpp"
#include "jolt/sampler.hpp"
#include "jolt/schema.hpp"
#include "jolt/serializer.hpp"
#include "jolt/tokenizer.hpp"

namespace jolt {

/// Which columns query tokens may additionally see during training.
enum class NoiseMode {
    Confusion,  // weighted by the model's own epoch-1 marker probabilities
    Random,     // uniform weights
    None,       // k forced to 0
};

const char* to_string(NoiseMode m) noexcept;
NoiseMode noise_mode_from(std::string_view s);

struct TrainConfig {
    std::size_t epochs = 3;
    double lr = 3e-4;
    double weight_decay = 1e-4;
    std::size_t grad_accum = 6;
    double max_grad_norm = 1.0;
    double beta = 0.2;
    double link_threshold = 0.05;
    std::uint64_t seed = 7;
    NoiseMode noise = NoiseMode::Confusion;
    /// Weight of L_NTP in the joint loss; 1 is the plain sum.
    double loss_ratio = 1.0;
    /// Stop after this many example steps; 0 runs every epoch to the end.
    std::size_t max_steps = 0;
    /// "cosine" (linear warmup, cosine decay to zero) or "constant".
    std::string lr_schedule = "cosine";
    double warmup_fraction = 0.05;
    std::size_t max_new_tokens = 64;
    /// Leading share of the corpus used for training (low-resource runs).
    double train_fraction = 1.0;
    /// Where epoch-1 weights persist; empty keeps them in memory only.
    std::string weight_cache_path;
    ModelConfig model;

    /// Throws ConfigError on out-of-range values.
    void validate() const;
    nlohmann::json to_json() const;
    /// Missing keys keep defaults; unknown keys throw ConfigError.
    static TrainConfig from_json(const nlohmann::json& j);
};

struct TrainingExample {
    std::string id;
    std::string db_id;
    std::string question;
    std::string prefix;
    SerializedSchema schema;
    std::string gold_sql;
    LinkSet link;
    /// One 0/1 entry per column in serialization (marker) order.
    std::vector<int> label;
    /// Flat indices of the columns labeled 1.
    std::vector<std::size_t> gt_columns;
    /// Filled by tokenize_example; GT flags set, noisy flags clear.
    Encoding enc;
};

/// Task instruction followed by the question.
std::string make_prefix(std::string_view question);

/// Serializes the schema (examples attached from `db` when given), extracts the
/// gold links and labels. Throws DegenerateExample when the query references no
/// column, and propagates parse and resolve errors.
TrainingExample build_training_example(std::string id, std::string_view question, const SchemaDocument& doc, std::string gold_sql,
                                       const Database* db = nullptr, std::string db_id = {});

/// Encodes prefix, schema and gold query and marks the GT schema tokens.
void tokenize_example(TrainingExample& ex, const Vocab& vocab, std::size_t max_len = kDefaultMaxLen);

/// Vocabulary over every prefix, schema and query text.
Vocab build_vocab(const std::vector<TrainingExample>& corpus);

/// One training-data record: id, db_id, question, prefix, schema, query, text,
/// link, label, schema_element_token_spans, query_span. Token spans index the
/// encoded sequence (BOS at 0); column spans run through the marker; query_span
/// covers the gold SQL tokens.
nlohmann::ordered_json example_to_json(const TrainingExample& ex);
/// Inverse of example_to_json (untokenized). Throws FormatError on inconsistent records.
TrainingExample example_from_json(const nlohmann::json& j);

void write_jsonl(const std::string& path, const std::vector<TrainingExample>& corpus);
std::vector<TrainingExample> read_jsonl(const std::string& path);

struct StepLog {
    std::size_t step = 0;  // 1-based example step
    std::size_t epoch = 0;
    std::string example_id;
    double l_sl = 0;
    double l_ntp = 0;
    std::size_t k = 0;
    std::vector<std::size_t> noisy;
    double lr = 0;
    bool optimizer_step = false;
};

struct TrainHooks {
    std::function<void(const StepLog&)> on_step;
    std::function<void(std::size_t epoch, const WeightCache&)> on_epoch_end;
};

struct TrainResult {
    ModelParams<float> params;
    WeightCache cache;
    std::vector<StepLog> log;
    /// No-gradient weight-capture forwards run in each epoch.
    std::vector<std::size_t> capture_forwards;
    std::size_t optimizer_steps = 0;
};

/// The noise columns for one training step: k from draw_noise_count, then a
/// weighted draw from the non-GT pool (`weights` aligned to that pool; null means uniform).
NoiseDraw draw_step_noise(const TrainingExample& ex, const std::vector<double>* weights, const TrainConfig& cfg, CounterRng& rng);

/// Joint mask of `ex` with `noisy` as the noisy schema columns.
AttentionMask step_mask(const TrainingExample& ex, const std::vector<std::size_t>& noisy);

/// Joint training loop. Epoch 1 runs one extra no-gradient forward per example
/// (Confusion mode only) to cache marker probabilities of its non-GT columns;
/// later epochs reuse the cache. Every step draws noise, rebuilds the mask,
/// and backpropagates L_SL + L_NTP; AdamW steps every grad_accum examples after
/// clipping. Throws NonFiniteLoss. Examples must be tokenized with `vocab`.
TrainResult train(const std::vector<TrainingExample>& corpus, const Vocab& vocab, const TrainConfig& cfg, const TrainHooks& hooks = {});

struct LinkPrediction {
    std::vector<double> scores;           // per column, marker order
    std::vector<std::size_t> predicted;   // flat indices with score > threshold
};

/// One forward under the joint mask (no GT, no noise); reads marker rows only.
LinkPrediction link_schema(const ModelParams<float>& params, const Encoding& enc, double threshold);

/// Prefix, then every table with a predicted column, minus its unpredicted
/// definitions and all markers. Positions keep their original values. Throws
/// EmptyPrediction when nothing is predicted.
TokenSequence prune_prompt(const Encoding& enc, const std::vector<std::size_t>& predicted);

/// Joins SQL tokens with single spaces; "," ")" "." attach left, "(" attaches to aggregate names.
std::string detokenize_sql(const std::vector<std::string>& tokens);

struct InferenceResult {
    LinkPrediction link;
    std::vector<std::string> predicted_columns;  // "table.column"
    bool fell_back = false;                      // nothing predicted; full schema used
    TokenSequence pruned;
    std::string sql;
    double link_ms = 0;
    double generate_ms = 0;
    double e2e_ms = 0;
};

/// Generates SQL from the pruned prompt of `enc` (prefix + schema, query ignored).
/// An empty prediction falls back to every column. New tokens continue the
/// positions after the full prompt.
InferenceResult generate_from_prediction(const ModelParams<float>& params, const Vocab& vocab, const Encoding& enc,
                                         const LinkPrediction& link, std::size_t max_new_tokens);

/// link_schema, prune_prompt and greedy_generate under a causal mask, timed per stage.
InferenceResult infer(const ModelParams<float>& params, const Vocab& vocab, std::string_view question, const SerializedSchema& schema,
                      double threshold = 0.05, std::size_t max_new_tokens = 64);

/// Same as infer, starting from an encoding whose query segment is ignored.
InferenceResult infer_encoded(const ModelParams<float>& params, const Vocab& vocab, const Encoding& enc, double threshold,
                              std::size_t max_new_tokens);

}  // namespace jolt
