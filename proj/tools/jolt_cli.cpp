#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "jolt/corpus.hpp"
#include "jolt/error.hpp"
#include "jolt/eval.hpp"
#include "jolt/log.hpp"
#include "jolt/mask.hpp"
#include "jolt/run.hpp"
#include "jolt/sql.hpp"

using namespace jolt;
namespace fs = std::filesystem;

namespace {

std::string read_text(const std::string& path) {
    if (path == "-") {
        std::ostringstream os;
        os << std::cin.rdbuf();
        return os.str();
    }
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error(ErrorCode::IoError, "cannot read " + path);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    os << text;
}

nlohmann::json read_json(const std::string& path) {
    try {
        return nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::FormatError, path + ": " + e.what());
    }
}

std::string trim_newline(std::string s) {
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
    return s;
}

std::vector<std::size_t> parse_index_list(const std::string& csv) {
    std::vector<std::size_t> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            out.push_back(std::stoul(item));
        } catch (const std::exception&) {
            throw Error(ErrorCode::ConfigError, "bad column index '" + item + "'");
        }
    }
    return out;
}

/// Config file (or defaults), then JOLT_SEED, then --seed.
RunConfig load_run_config(const std::string& path, const std::optional<std::uint64_t>& flag_seed) {
    RunConfig cfg = path.empty() ? RunConfig{} : RunConfig::load(path);
    if (auto s = env_seed()) cfg.seed = *s;
    if (flag_seed) cfg.seed = *flag_seed;
    cfg.resolve();
    return cfg;
}

struct Common {
    std::string log_path;
    std::unique_ptr<std::ofstream> log_file;
    std::unique_ptr<EventLog> log;

    EventLog& events() {
        if (!log) {
            if (!log_path.empty()) {
                log_file = std::make_unique<std::ofstream>(log_path, std::ios::app);
                if (!*log_file) throw Error(ErrorCode::IoError, "cannot open log " + log_path);
                log = std::make_unique<EventLog>(log_file.get());
            } else {
                log = std::make_unique<EventLog>(&std::cerr);
            }
        }
        return *log;
    }
};

Encoding encode_from_files(const std::string& prefix_path, const std::string& ddl_path, const std::string& spans_path,
                           const std::string& query_path, const std::string& vocab_path, std::size_t max_len, Vocab& vocab) {
    const std::string prefix = trim_newline(read_text(prefix_path));
    SerializedSchema schema;
    schema.text = read_text(ddl_path);
    schema.spans = SpanIndex::from_json(nlohmann::ordered_json::parse(read_text(spans_path)));
    const std::string query = query_path.empty() ? std::string() : trim_newline(read_text(query_path));
    vocab = vocab_path.empty() ? Vocab::build({prefix, schema.text, query}) : Vocab::from_json(read_json(vocab_path));
    return encode(prefix, schema, query, vocab, max_len);
}

char segment_char(const SegmentMap& seg, std::size_t i) {
    if (seg.segment[i] == Segment::Prefix) return 'P';
    if (seg.segment[i] == Segment::Query) return 'Q';
    return seg.marker[i] ? 'M' : 'S';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Schema-linking text-to-SQL toolkit: corpus generation, joint training, inference and evaluation."};
    app.require_subcommand(1);
    Common common;
    app.add_option("--log", common.log_path, "Append JSON-lines events here instead of stderr");

    // extract-gt
    auto* extract = app.add_subcommand("extract-gt", "Print the columns a SQL query references");
    std::string ex_sql, ex_schema;
    extract->add_option("--sql", ex_sql, "SQL file, or - for stdin")->required();
    extract->add_option("--schema", ex_schema, "schema.json")->required();

    // serialize
    auto* serialize = app.add_subcommand("serialize", "Render a schema as DDL with markers and write its spans");
    std::string se_schema, se_db, se_spans = "spans.json";
    serialize->add_option("--schema", se_schema, "schema.json")->required();
    serialize->add_option("--db", se_db, "SQLite file supplying example values");
    serialize->add_option("--spans", se_spans, "Where to write the span index")->capture_default_str();

    // encode and mask-viz share their inputs
    std::string en_prefix, en_ddl, en_spans, en_query, en_vocab, en_vocab_out;
    std::size_t en_max_len = kDefaultMaxLen;
    auto add_encode_inputs = [&](CLI::App* sub) {
        sub->add_option("--prefix", en_prefix, "Prefix text file")->required();
        sub->add_option("--schema", en_ddl, "Serialized schema (DDL text) file")->required();
        sub->add_option("--spans", en_spans, "spans.json from serialize")->required();
        sub->add_option("--query", en_query, "Gold SQL file");
        sub->add_option("--vocab", en_vocab, "vocab.json; built from the inputs when absent");
        sub->add_option("--max-len", en_max_len, "Sequence limit")->capture_default_str();
    };
    auto* encode_cmd = app.add_subcommand("encode", "Tokenize prefix, schema and query and print ids with segments");
    add_encode_inputs(encode_cmd);
    encode_cmd->add_option("--vocab-out", en_vocab_out, "Write the vocabulary used");

    auto* maskviz = app.add_subcommand("mask-viz", "Render the joint attention mask");
    add_encode_inputs(maskviz);
    std::string mv_gt, mv_noisy, mv_format = "ascii", mv_out;
    maskviz->add_option("--gt", mv_gt, "Comma-separated GT column indices (marker order)");
    maskviz->add_option("--noisy", mv_noisy, "Comma-separated noisy column indices");
    maskviz->add_option("--format", mv_format, "ascii, ppm or svg")->check(CLI::IsMember({"ascii", "ppm", "svg"}))->capture_default_str();
    maskviz->add_option("--out", mv_out, "Output file (stdout when absent)");

    // gen-corpus
    auto* gen = app.add_subcommand("gen-corpus", "Generate databases and train/dev question-SQL pairs");
    std::string gc_config, gc_out;
    std::optional<std::uint64_t> gc_seed;
    gen->add_option("--config", gc_config, "Run config JSON (corpus section used)");
    gen->add_option("--out", gc_out, "Output directory")->required();
    gen->add_option("--seed", gc_seed, "Root seed override");

    // train
    auto* train_cmd = app.add_subcommand("train", "Joint schema-linking and SQL-generation training");
    std::string tr_corpus, tr_dev, tr_config, tr_out;
    std::optional<std::uint64_t> tr_seed;
    std::optional<std::size_t> tr_epochs, tr_max_steps;
    std::optional<double> tr_lr;
    std::optional<std::string> tr_noise;
    train_cmd->add_option("--corpus", tr_corpus, "Training JSON-lines")->required();
    train_cmd->add_option("--dev", tr_dev, "Dev JSON-lines whose inputs join the vocabulary");
    train_cmd->add_option("--config", tr_config, "Run config JSON (train section used)");
    train_cmd->add_option("--out", tr_out, "Checkpoint path")->required();
    train_cmd->add_option("--seed", tr_seed, "Root seed override");
    train_cmd->add_option("--epochs", tr_epochs, "Override train.epochs");
    train_cmd->add_option("--max-steps", tr_max_steps, "Override train.max_steps");
    train_cmd->add_option("--lr", tr_lr, "Override train.lr");
    train_cmd->add_option("--noise", tr_noise, "Override train.noise")->check(CLI::IsMember({"confusion", "random", "none"}));

    // infer
    auto* infer_cmd = app.add_subcommand("infer", "Link, prune and generate SQL for one question");
    std::string in_ckpt, in_question, in_schema, in_db;
    double in_threshold = 0.05;
    std::size_t in_max_new = 64;
    infer_cmd->add_option("--ckpt", in_ckpt, "Checkpoint")->required();
    infer_cmd->add_option("--question", in_question, "Question text")->required();
    infer_cmd->add_option("--schema", in_schema, "schema.json")->required();
    infer_cmd->add_option("--db", in_db, "SQLite file supplying example values");
    infer_cmd->add_option("--threshold", in_threshold, "Linking threshold")->capture_default_str();
    infer_cmd->add_option("--max-new", in_max_new, "Generation budget")->capture_default_str();

    // eval and sweep
    std::string ev_ckpt, ev_dev, ev_dbs, ev_config, ev_out = ".";
    bool ev_sweep = false, ev_macro = false;
    std::optional<double> ev_threshold;
    std::optional<std::size_t> ev_threads;
    auto add_eval_inputs = [&](CLI::App* sub) {
        sub->add_option("--ckpt", ev_ckpt, "Checkpoint")->required();
        sub->add_option("--dev", ev_dev, "Dev JSON-lines")->required();
        sub->add_option("--dbs", ev_dbs, "Directory of <db_id>.sqlite files")->required();
        sub->add_option("--config", ev_config, "Run config JSON (eval section used)");
        sub->add_option("--out", ev_out, "Directory for metrics.json, sweep.csv, sweep.svg")->capture_default_str();
        sub->add_option("--threshold", ev_threshold, "Override eval.threshold");
        sub->add_option("--threads", ev_threads, "Override eval.threads");
        sub->add_flag("--macro", ev_macro, "Average P/R/AUC per example instead of pooling");
    };
    auto* eval_cmd = app.add_subcommand("eval", "Linking metrics and execution accuracy on a dev set");
    add_eval_inputs(eval_cmd);
    eval_cmd->add_flag("--sweep", ev_sweep, "Also run the threshold sweep");
    auto* sweep_cmd = app.add_subcommand("sweep", "Threshold sweep of P, R and EX");
    add_eval_inputs(sweep_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*extract) {
            const auto doc = SchemaDocument::load(ex_schema);
            const auto links = sql::extract_links(trim_newline(read_text(ex_sql)), doc);
            nlohmann::json out = nlohmann::json::array();
            for (const auto& l : links) out.push_back(l.str());  // LinkSet iterates in sorted order
            std::cout << out.dump() << '\n';
        } else if (*serialize) {
            auto doc = SchemaDocument::load(se_schema);
            if (!se_db.empty()) attach_examples(doc, Database(se_db));
            const auto s = serialize_schema(doc);
            write_text(se_spans, s.spans.to_json().dump(2) + "\n");
            std::cout << s.text << '\n';
        } else if (*encode_cmd) {
            Vocab vocab;
            const auto enc = encode_from_files(en_prefix, en_ddl, en_spans, en_query, en_vocab, en_max_len, vocab);
            if (!en_vocab_out.empty()) write_text(en_vocab_out, vocab.to_json().dump(2) + "\n");
            nlohmann::ordered_json out;
            std::vector<std::string> tokens;
            std::string segments;
            for (std::size_t i = 0; i < enc.tokens.size(); ++i) {
                tokens.push_back(vocab.token(enc.tokens.ids[i]));
                segments += segment_char(enc.segments, i);
            }
            out["ids"] = enc.tokens.ids;
            out["tokens"] = tokens;
            out["positions"] = enc.tokens.positions;
            out["segments"] = segments;
            out["markers"] = enc.segments.marker_positions();
            std::cout << out.dump() << '\n';
        } else if (*maskviz) {
            Vocab vocab;
            auto enc = encode_from_files(en_prefix, en_ddl, en_spans, en_query, en_vocab, en_max_len, vocab);
            enc.segments.set_gt_columns(parse_index_list(mv_gt));
            enc.segments.set_noisy_columns(parse_index_list(mv_noisy));
            const auto mask = build_joint_mask(enc.segments);
            std::vector<std::string> labels;
            for (auto id : enc.tokens.ids) labels.push_back(vocab.token(id));
            std::string rendered;
            if (mv_format == "ppm") rendered = render_mask_ppm(mask);
            else if (mv_format == "svg") rendered = render_mask_svg(mask, &labels);
            else rendered = render_mask_ascii(mask, &enc.segments, &labels);
            if (mv_out.empty()) std::cout << rendered;
            else write_text(mv_out, rendered);
        } else if (*gen) {
            const auto cfg = load_run_config(gc_config, gc_seed);
            const auto corpus = generate_corpus(cfg.corpus);
            write_corpus(corpus, gc_out);
            write_text(fs::path(gc_out) / "config.json", cfg.to_json().dump(2) + "\n");
            const auto stats = corpus_stats(corpus.train);
            common.events().emit("gen_corpus", {{"databases", corpus.databases.size()},
                                                {"train", corpus.train.size()},
                                                {"dev", corpus.dev.size()},
                                                {"avg_columns", stats.avg_columns},
                                                {"positive_rate", stats.positive_rate}});
        } else if (*train_cmd) {
            auto cfg = load_run_config(tr_config, tr_seed);
            if (tr_epochs) cfg.train.epochs = *tr_epochs;
            if (tr_max_steps) cfg.train.max_steps = *tr_max_steps;
            if (tr_lr) cfg.train.lr = *tr_lr;
            if (tr_noise) cfg.train.noise = noise_mode_from(*tr_noise);
            cfg.train.validate();
            write_text(tr_out + ".config.json", cfg.to_json().dump(2) + "\n");

            auto corpus = read_jsonl(tr_corpus);
            const auto dev = tr_dev.empty() ? std::vector<TrainingExample>{} : read_jsonl(tr_dev);
            const Vocab vocab = corpus_vocab(corpus, dev);
            for (auto& ex : corpus) tokenize_example(ex, vocab, cfg.train.model.max_len);
            auto& log = common.events();
            TrainHooks hooks;
            hooks.on_step = [&](const StepLog& s) {
                log.emit("train_step", {{"step", s.step},
                                        {"epoch", s.epoch},
                                        {"example", s.example_id},
                                        {"l_sl", s.l_sl},
                                        {"l_ntp", s.l_ntp},
                                        {"k", s.k},
                                        {"noisy", s.noisy},
                                        {"optimizer_step", s.optimizer_step},
                                        {"lr", s.lr}});
            };
            hooks.on_epoch_end = [&](std::size_t epoch, const WeightCache& cache) {
                log.emit("epoch_end", {{"epoch", epoch}, {"cached_examples", cache.size()}});
            };
            const auto result = train(corpus, vocab, cfg.train, hooks);
            save_checkpoint(tr_out, result.params, vocab);
            log.emit("train_done", {{"steps", result.log.size()},
                                    {"optimizer_steps", result.optimizer_steps},
                                    {"capture_forwards", result.capture_forwards},
                                    {"checkpoint", tr_out}});
        } else if (*infer_cmd) {
            const auto ckpt = load_checkpoint(in_ckpt);
            auto doc = SchemaDocument::load(in_schema);
            if (!in_db.empty()) attach_examples(doc, Database(in_db));
            const auto r = infer(ckpt.params, ckpt.vocab, in_question, serialize_schema(doc), in_threshold, in_max_new);
            common.events().emit("infer", {{"link_ms", r.link_ms}, {"generate_ms", r.generate_ms}, {"e2e_ms", r.e2e_ms}});
            nlohmann::ordered_json out;
            out["sql"] = r.sql;
            out["predicted_columns"] = r.predicted_columns;
            out["scores"] = r.link.scores;
            out["fell_back"] = r.fell_back;
            std::cout << out.dump() << '\n';
        } else if (*eval_cmd || *sweep_cmd) {
            auto cfg = load_run_config(ev_config, std::nullopt);
            if (ev_threshold) cfg.eval.threshold = *ev_threshold;
            if (ev_threads) cfg.eval.threads = *ev_threads;
            if (ev_macro) cfg.eval.macro = true;
            const auto ckpt = load_checkpoint(ev_ckpt);
            const auto dev = read_jsonl(ev_dev);
            const fs::path out(ev_out);
            write_text(out / "eval.config.json", cfg.to_json().dump(2) + "\n");
            auto& log = common.events();
            if (*eval_cmd) {
                const auto r = evaluate(ckpt.params, ckpt.vocab, dev, ev_dbs, cfg.eval);
                const auto metrics = metrics_json(r);
                write_text(out / "metrics.json", metrics.dump(2) + "\n");
                log.emit("eval", {{"examples", dev.size()}, {"ex", r.ex.ex}, {"roc_auc", r.link.roc_auc}, {"recall", r.link.recall}});
                nlohmann::ordered_json summary = metrics;
                summary.erase("per_example");
                std::cout << summary.dump() << '\n';
            }
            if (ev_sweep || *sweep_cmd) {
                const auto rows = threshold_sweep(ckpt.params, ckpt.vocab, dev, ev_dbs, kSweepThresholds, cfg.eval);
                write_text(out / "sweep.csv", sweep_csv(rows));
                write_text(out / "sweep.svg", sweep_svg(rows));
                log.emit("sweep", {{"thresholds", rows.size()}});
                std::cout << sweep_csv(rows);
            }
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
