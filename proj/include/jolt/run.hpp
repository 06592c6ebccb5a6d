#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "jolt/corpus.hpp"
#include "jolt/eval.hpp"
#include "jolt/log.hpp"
#include "jolt/pipeline.hpp"

namespace jolt {

/// Everything a run needs, from one file: {"seed", "corpus", "train", "eval"}.
/// The root seed feeds both the corpus and the trainer; sections may not set their own.
struct RunConfig {
    std::uint64_t seed = 7;
    CorpusConfig corpus;
    TrainConfig train;
    EvalOptions eval;

    /// Copies the root seed into the sections.
    void resolve();
    /// The resolved snapshot; loading it back yields the same run.
    nlohmann::ordered_json to_json() const;
    /// Unknown keys throw ConfigError at every level.
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig load(const std::string& path);
};

nlohmann::json eval_options_to_json(const EvalOptions& o);
EvalOptions eval_options_from_json(const nlohmann::json& j);

/// Value of JOLT_SEED when set and numeric; ConfigError when set but malformed.
std::optional<std::uint64_t> env_seed();

/// Generate the corpus into `workdir`, train on train.jsonl, evaluate on dev.jsonl.
/// Writes config.json, train.log.jsonl, model.ckpt and metrics.json; returns the metrics.
nlohmann::ordered_json run_pipeline(const RunConfig& cfg, const std::string& workdir, EventLog* log = nullptr);

}  // namespace jolt
