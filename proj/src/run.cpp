#include "jolt/run.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "jolt/error.hpp"

namespace jolt {

nlohmann::json eval_options_to_json(const EvalOptions& o) {
    return {{"threshold", o.threshold}, {"max_new_tokens", o.max_new_tokens}, {"macro", o.macro}, {"threads", o.threads}};
}

EvalOptions eval_options_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(ErrorCode::ConfigError, "eval options must be an object");
    EvalOptions o;
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "threshold") o.threshold = v.get<double>();
            else if (key == "max_new_tokens") o.max_new_tokens = v.get<std::size_t>();
            else if (key == "macro") o.macro = v.get<bool>();
            else if (key == "threads") o.threads = v.get<std::size_t>();
            else throw Error(ErrorCode::ConfigError, "unknown eval key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ConfigError, std::string("eval options: ") + e.what());
    }
    if (!(o.threshold >= 0 && o.threshold <= 1)) throw Error(ErrorCode::ConfigError, "threshold must lie in [0, 1]");
    if (o.threads == 0) throw Error(ErrorCode::ConfigError, "threads must be >= 1");
    return o;
}

void RunConfig::resolve() {
    corpus.seed = seed;
    train.seed = seed;
}

nlohmann::ordered_json RunConfig::to_json() const {
    auto c = corpus.to_json();
    auto t = train.to_json();
    c.erase("seed");
    t.erase("seed");
    nlohmann::ordered_json j;
    j["seed"] = seed;
    j["corpus"] = c;
    j["train"] = t;
    j["eval"] = eval_options_to_json(eval);
    return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(ErrorCode::ConfigError, "run config must be an object");
    RunConfig c;
    for (const auto& [key, v] : j.items()) {
        if (key != "seed" && v.is_object() && v.contains("seed")) {
            throw Error(ErrorCode::ConfigError, "'" + key + ".seed' is not allowed; set the top-level seed");
        }
        if (key == "seed") {
            if (!v.is_number_unsigned()) throw Error(ErrorCode::ConfigError, "seed must be a non-negative integer");
            c.seed = v.get<std::uint64_t>();
        } else if (key == "corpus") c.corpus = CorpusConfig::from_json(v);
        else if (key == "train") c.train = TrainConfig::from_json(v);
        else if (key == "eval") c.eval = eval_options_from_json(v);
        else throw Error(ErrorCode::ConfigError, "unknown config key '" + key + "'");
    }
    c.resolve();
    return c;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error(ErrorCode::IoError, "cannot read " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ConfigError, path + ": " + e.what());
    }
    return from_json(j);
}

std::optional<std::uint64_t> env_seed() {
    const char* s = std::getenv("JOLT_SEED");
    if (!s || !*s) return std::nullopt;
    try {
        std::size_t used = 0;
        const auto v = std::stoull(s, &used);
        if (used != std::string(s).size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorCode::ConfigError, std::string("JOLT_SEED is not a non-negative integer: ") + s);
    }
}

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream os(p, std::ios::trunc);
    if (!os) throw Error(ErrorCode::IoError, "cannot write " + p.string());
    os << text;
}

}  // namespace

nlohmann::ordered_json run_pipeline(const RunConfig& input, const std::string& workdir, EventLog* log) {
    namespace fs = std::filesystem;
    RunConfig cfg = input;
    cfg.resolve();
    const fs::path root(workdir);
    fs::create_directories(root);
    write_text(root / "config.json", cfg.to_json().dump(2) + "\n");

    auto corpus = generate_corpus(cfg.corpus);
    write_corpus(corpus, (root / "corpus").string());
    if (log) {
        log->emit("corpus", {{"train", corpus.train.size()}, {"dev", corpus.dev.size()}, {"databases", corpus.databases.size()}});
    }

    const Vocab vocab = corpus_vocab(corpus.train, corpus.dev);
    for (auto& ex : corpus.train) tokenize_example(ex, vocab, cfg.train.model.max_len);

    std::ofstream train_log(root / "train.log.jsonl", std::ios::trunc);
    EventLog step_log(&train_log);
    TrainHooks hooks;
    hooks.on_step = [&](const StepLog& s) {
        step_log.emit("train_step", {{"step", s.step}, {"epoch", s.epoch}, {"example", s.example_id}, {"l_sl", s.l_sl}, {"l_ntp", s.l_ntp}, {"k", s.k}});
    };
    const auto result = train(corpus.train, vocab, cfg.train, hooks);
    save_checkpoint((root / "model.ckpt").string(), result.params, vocab);
    if (log) log->emit("train", {{"steps", result.log.size()}, {"optimizer_steps", result.optimizer_steps}});

    const auto eval = evaluate(result.params, vocab, corpus.dev, (root / "corpus" / "dbs").string(), cfg.eval);
    auto metrics = metrics_json(eval);
    write_text(root / "metrics.json", metrics.dump(2) + "\n");
    if (log) log->emit("eval", {{"ex", eval.ex.ex}, {"roc_auc", eval.link.roc_auc}});
    return metrics;
}

}  // namespace jolt
