#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "jolt/db.hpp"
#include "jolt/pipeline.hpp"
#include "jolt/schema.hpp"

namespace jolt {

/// Template families: projection, filter, aggregate, join, order_limit.
inline const std::vector<std::string> kCorpusTemplates = {"projection", "filter", "aggregate", "join", "order_limit"};

struct CorpusConfig {
    std::size_t num_databases = 20;
    std::size_t num_examples = 600;
    std::size_t min_tables = 2, max_tables = 3;
    /// Column counts include the id key and any foreign key.
    std::size_t min_columns = 4, max_columns = 8;
    std::size_t min_rows = 20, max_rows = 50;
    std::vector<std::string> templates = kCorpusTemplates;
    /// Share of examples in train; the default gives 500 / 100.
    double train_ratio = 5.0 / 6.0;
    std::uint64_t seed = 7;
    std::size_t max_len = kDefaultMaxLen;
    /// Worker threads for per-database generation; output does not depend on it.
    std::size_t threads = 1;

    /// Throws ConfigError on empty ranges, unknown templates or a split outside (0, 1).
    void validate() const;
    nlohmann::json to_json() const;
    /// Missing keys keep defaults; unknown keys throw ConfigError.
    static CorpusConfig from_json(const nlohmann::json& j);
};

struct GeneratedDatabase {
    std::string db_id;
    SchemaDocument doc;  // examples attached
    Database db;
};

struct Corpus {
    std::vector<GeneratedDatabase> databases;
    std::vector<TrainingExample> train;
    std::vector<TrainingExample> dev;
};

/// Databases with PK/FK integrity and template-rendered (question, SQL) pairs.
/// Every gold query resolves, executes with at least one row, links at least
/// one column and fits max_len. Deterministic in the config (threads aside).
Corpus generate_corpus(const CorpusConfig& cfg);

/// Writes dbs/<db_id>.sqlite, schema/<db_id>.json, train.jsonl and dev.jsonl under `dir`.
void write_corpus(const Corpus& corpus, const std::string& dir);

struct CorpusStats {
    std::size_t examples = 0;
    double avg_columns = 0;
    double positive_rate = 0;
};

CorpusStats corpus_stats(const std::vector<TrainingExample>& examples);

/// Vocabulary for training: all train texts plus dev prefixes and schemas
/// (inputs visible at inference), never dev gold SQL.
Vocab corpus_vocab(const std::vector<TrainingExample>& train, const std::vector<TrainingExample>& dev);

}  // namespace jolt
