#include "jolt/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "jolt/error.hpp"
#include "jolt/sql.hpp"

namespace jolt {

const char* to_string(NoiseMode m) noexcept {
    switch (m) {
        case NoiseMode::Confusion: return "confusion";
        case NoiseMode::Random: return "random";
        case NoiseMode::None: return "none";
    }
    return "confusion";
}

NoiseMode noise_mode_from(std::string_view s) {
    if (s == "confusion") return NoiseMode::Confusion;
    if (s == "random") return NoiseMode::Random;
    if (s == "none") return NoiseMode::None;
    throw Error(ErrorCode::ConfigError, "noise must be confusion, random or none, not '" + std::string(s) + "'");
}

void TrainConfig::validate() const {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw Error(ErrorCode::ConfigError, what);
    };
    require(epochs >= 1, "epochs must be >= 1");
    require(lr > 0 && std::isfinite(lr), "lr must be positive");
    require(weight_decay >= 0, "weight_decay must be >= 0");
    require(grad_accum >= 1, "grad_accum must be >= 1");
    require(max_grad_norm > 0, "max_grad_norm must be positive");
    require(beta > 0 && beta < 1, "beta must lie in (0, 1)");
    require(link_threshold > 0 && link_threshold < 1, "link_threshold must lie in (0, 1)");
    require(loss_ratio >= 0, "loss_ratio must be >= 0");
    require(lr_schedule == "cosine" || lr_schedule == "constant", "lr_schedule must be cosine or constant");
    require(warmup_fraction >= 0 && warmup_fraction < 1, "warmup_fraction must lie in [0, 1)");
    require(train_fraction > 0 && train_fraction <= 1, "train_fraction must lie in (0, 1]");
}

nlohmann::json TrainConfig::to_json() const {
    auto m = model.to_json();
    m.erase("vocab_size");
    return {{"epochs", epochs},
            {"lr", lr},
            {"weight_decay", weight_decay},
            {"grad_accum", grad_accum},
            {"max_grad_norm", max_grad_norm},
            {"beta", beta},
            {"link_threshold", link_threshold},
            {"seed", seed},
            {"noise", to_string(noise)},
            {"loss_ratio", loss_ratio},
            {"max_steps", max_steps},
            {"lr_schedule", lr_schedule},
            {"warmup_fraction", warmup_fraction},
            {"max_new_tokens", max_new_tokens},
            {"train_fraction", train_fraction},
            {"weight_cache_path", weight_cache_path},
            {"model", m}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(ErrorCode::ConfigError, "train config must be an object");
    TrainConfig c;
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "epochs") c.epochs = v.get<std::size_t>();
            else if (key == "lr") c.lr = v.get<double>();
            else if (key == "weight_decay") c.weight_decay = v.get<double>();
            else if (key == "grad_accum") c.grad_accum = v.get<std::size_t>();
            else if (key == "max_grad_norm") c.max_grad_norm = v.get<double>();
            else if (key == "beta") c.beta = v.get<double>();
            else if (key == "link_threshold") c.link_threshold = v.get<double>();
            else if (key == "seed") c.seed = v.get<std::uint64_t>();
            else if (key == "noise") c.noise = noise_mode_from(v.get<std::string>());
            else if (key == "loss_ratio") c.loss_ratio = v.get<double>();
            else if (key == "max_steps") c.max_steps = v.get<std::size_t>();
            else if (key == "lr_schedule") c.lr_schedule = v.get<std::string>();
            else if (key == "warmup_fraction") c.warmup_fraction = v.get<double>();
            else if (key == "max_new_tokens") c.max_new_tokens = v.get<std::size_t>();
            else if (key == "train_fraction") c.train_fraction = v.get<double>();
            else if (key == "weight_cache_path") c.weight_cache_path = v.get<std::string>();
            else if (key == "model") {
                auto m = v;
                m["vocab_size"] = c.model.vocab_size;
                c.model = ModelConfig::from_json(m);
            } else throw Error(ErrorCode::ConfigError, "unknown train key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ConfigError, std::string("train config: ") + e.what());
    }
    c.validate();
    return c;
}

std::string make_prefix(std::string_view question) {
    return "Task: write one SQLite query that answers the question.\nQuestion: " + std::string(question);
}

TrainingExample build_training_example(std::string id, std::string_view question, const SchemaDocument& doc, std::string gold_sql,
                                       const Database* db, std::string db_id) {
    SchemaDocument with_examples = doc;
    if (db) attach_examples(with_examples, *db);
    TrainingExample ex;
    ex.id = std::move(id);
    ex.db_id = std::move(db_id);
    ex.question = std::string(question);
    ex.prefix = make_prefix(question);
    ex.schema = serialize_schema(with_examples);
    ex.link = sql::extract_links(gold_sql, with_examples);
    if (ex.link.empty()) throw Error(ErrorCode::DegenerateExample, "query references no column: " + gold_sql);
    ex.gold_sql = std::move(gold_sql);
    ex.label = label_vector(ex.link, with_examples);
    for (std::size_t i = 0; i < ex.label.size(); ++i) {
        if (ex.label[i]) ex.gt_columns.push_back(i);
    }
    return ex;
}

void tokenize_example(TrainingExample& ex, const Vocab& vocab, std::size_t max_len) {
    ex.enc = encode(ex.prefix, ex.schema, ex.gold_sql, vocab, max_len);
    if (ex.enc.segments.column_count() != ex.label.size()) {
        throw Error(ErrorCode::LengthMismatch, ex.id + ": " + std::to_string(ex.label.size()) + " labels for " +
                                                   std::to_string(ex.enc.segments.column_count()) + " markers");
    }
    if (ex.enc.segments.range(Segment::Query).empty()) throw Error(ErrorCode::EmptyQuery, ex.id + ": gold query has no tokens");
    ex.enc.segments.set_gt_columns(ex.gt_columns);
}

Vocab build_vocab(const std::vector<TrainingExample>& corpus) {
    std::vector<std::string> texts;
    texts.reserve(corpus.size() * 3);
    for (const auto& ex : corpus) {
        texts.push_back(ex.prefix);
        texts.push_back(ex.schema.text);
        texts.push_back(ex.gold_sql);
    }
    return Vocab::build(texts);
}

namespace {

nlohmann::ordered_json span_json(const Span& s) { return nlohmann::ordered_json::array({s.begin, s.end}); }

Span span_from(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 2) throw Error(ErrorCode::FormatError, "span must be [begin, end]");
    return {j[0].get<std::size_t>(), j[1].get<std::size_t>()};
}

}  // namespace

nlohmann::ordered_json example_to_json(const TrainingExample& ex) {
    // Spans depend only on the word split, so an empty vocabulary suffices.
    const Encoding enc = encode(ex.prefix, ex.schema, ex.gold_sql, Vocab(), std::numeric_limits<std::size_t>::max());
    nlohmann::ordered_json spans = nlohmann::ordered_json::object();
    for (const auto& t : enc.segments.tables) {
        nlohmann::ordered_json jt;
        jt["header"] = span_json(t.header);
        jt["pk"] = t.pk ? span_json(*t.pk) : nlohmann::ordered_json(nullptr);
        jt["fk"] = nlohmann::ordered_json::array();
        for (const auto& fk : t.fks) jt["fk"].push_back(span_json(fk));
        jt["footer"] = span_json(t.footer);
        nlohmann::ordered_json cols = nlohmann::ordered_json::object();
        for (const auto& c : t.columns) cols[c.name] = span_json(c.definition);
        jt["columns"] = std::move(cols);
        spans[t.name] = std::move(jt);
    }
    Span q = enc.segments.range(Segment::Query);
    if (!q.empty()) q = {q.begin + 1, q.end - 1};  // BOS and EOS frame the query segment but are not gold SQL text
    nlohmann::ordered_json links = nlohmann::ordered_json::array();
    for (const auto& l : ex.link) links.push_back(l.str());
    nlohmann::ordered_json j;
    j["id"] = ex.id;
    j["db_id"] = ex.db_id;
    j["question"] = ex.question;
    j["prefix"] = ex.prefix;
    j["schema"] = ex.schema.text;
    j["query"] = ex.gold_sql;
    j["text"] = joined_text(ex.prefix, ex.schema.text, ex.gold_sql);
    j["link"] = std::move(links);
    j["label"] = ex.label;
    j["schema_element_token_spans"] = std::move(spans);
    j["query_span"] = span_json(q);
    return j;
}

TrainingExample example_from_json(const nlohmann::json& j) {
    TrainingExample ex;
    try {
        ex.id = j.at("id").get<std::string>();
        ex.db_id = j.value("db_id", std::string());
        ex.question = j.value("question", std::string());
        ex.prefix = j.at("prefix").get<std::string>();
        ex.schema.text = j.at("schema").get<std::string>();
        ex.gold_sql = j.at("query").get<std::string>();
        for (const auto& l : j.at("link")) ex.link.insert(QualifiedColumn::parse(l.get<std::string>()));
        ex.label = j.at("label").get<std::vector<int>>();

        // Token spans back to character spans of the schema text.
        const auto schema_tokens = split_words(ex.schema.text);
        const std::size_t base = 1 + split_words(ex.prefix).size();
        auto chars = [&](const Span& s) -> Span {
            if (s.begin < base || s.end <= s.begin || s.end - base > schema_tokens.size()) {
                throw Error(ErrorCode::FormatError, ex.id + ": token span outside the schema");
            }
            return {schema_tokens[s.begin - base].chars.begin, schema_tokens[s.end - 1 - base].chars.end};
        };
        for (const auto& [name, jt] : j.at("schema_element_token_spans").items()) {
            TableSpans t;
            t.name = name;
            t.header = chars(span_from(jt.at("header")));
            if (!jt.at("pk").is_null()) t.pk = chars(span_from(jt.at("pk")));
            for (const auto& fk : jt.at("fk")) t.fks.push_back(chars(span_from(fk)));
            t.footer = chars(span_from(jt.at("footer")));
            for (const auto& [cname, jc] : jt.at("columns").items()) {
                const Span tok = span_from(jc);
                t.columns.push_back({cname, chars(tok), chars({tok.end - 1, tok.end})});
            }
            ex.schema.spans.tables.push_back(std::move(t));
        }
        // Object keys carry no order; serialization order is text order.
        auto& tables = ex.schema.spans.tables;
        for (auto& t : tables) {
            std::sort(t.columns.begin(), t.columns.end(),
                      [](const ColumnSpan& a, const ColumnSpan& b) { return a.definition.begin < b.definition.begin; });
        }
        std::sort(tables.begin(), tables.end(), [](const TableSpans& a, const TableSpans& b) { return a.header.begin < b.header.begin; });
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::FormatError, std::string("training record: ") + e.what());
    }
    if (ex.label.size() != ex.schema.spans.column_count()) {
        throw Error(ErrorCode::FormatError, ex.id + ": label count differs from column count");
    }
    std::size_t positives = 0;
    for (std::size_t i = 0; i < ex.label.size(); ++i) {
        if (ex.label[i]) {
            ex.gt_columns.push_back(i);
            ++positives;
        }
    }
    if (positives != ex.link.size()) throw Error(ErrorCode::FormatError, ex.id + ": link and label disagree");
    return ex;
}

void write_jsonl(const std::string& path, const std::vector<TrainingExample>& corpus) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw Error(ErrorCode::IoError, "cannot write " + path);
    for (const auto& ex : corpus) os << example_to_json(ex).dump() << '\n';
    if (!os) throw Error(ErrorCode::IoError, "failed writing " + path);
}

std::vector<TrainingExample> read_jsonl(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error(ErrorCode::IoError, "cannot read " + path);
    std::vector<TrainingExample> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::FormatError, path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        out.push_back(example_from_json(j));
    }
    return out;
}

NoiseDraw draw_step_noise(const TrainingExample& ex, const std::vector<double>* weights, const TrainConfig& cfg, CounterRng& rng) {
    if (cfg.noise == NoiseMode::None) return {};
    const std::size_t k = draw_noise_count(ex.label.size(), cfg.beta, rng);
    const auto pool = noise_pool(ex.label.size(), ex.gt_columns);
    if (weights) return sample_noisy(pool, *weights, k, rng);
    return sample_noisy(pool, std::vector<double>(pool.size(), 1.0), k, rng);
}

AttentionMask step_mask(const TrainingExample& ex, const std::vector<std::size_t>& noisy) {
    SegmentMap seg = ex.enc.segments;
    seg.set_noisy_columns(noisy);
    return build_joint_mask(seg);
}

namespace {

constexpr std::uint64_t kShuffleStream = 0x5348554646ULL;

double scheduled_lr(const TrainConfig& cfg, std::size_t update, std::size_t total_updates) {
    if (cfg.lr_schedule == "constant") return cfg.lr;
    const auto warmup = static_cast<std::size_t>(std::floor(cfg.warmup_fraction * static_cast<double>(total_updates)));
    if (update < warmup) return cfg.lr * static_cast<double>(update + 1) / static_cast<double>(warmup + 1);
    const double span = static_cast<double>(std::max<std::size_t>(1, total_updates - warmup));
    const double progress = std::min(1.0, static_cast<double>(update - warmup) / span);
    return cfg.lr * 0.5 * (1.0 + std::cos(3.141592653589793 * progress));
}

/// Marker probabilities of the non-GT columns, in pool order.
std::vector<double> capture_weights(const ModelParams<float>& params, const TrainingExample& ex) {
    ad::NoGradGuard no_grad;
    const std::vector<std::size_t> none;
    const auto out = forward(params, ex.enc.tokens, step_mask(ex, {}), &none);
    const auto markers = ex.enc.segments.marker_positions();
    std::vector<double> w;
    for (auto c : noise_pool(ex.label.size(), ex.gt_columns)) {
        w.push_back(static_cast<double>(out.marker_probs.value()(static_cast<Eigen::Index>(markers[c]), 0)));
    }
    return w;
}

}  // namespace

TrainResult train(const std::vector<TrainingExample>& full_corpus, const Vocab& vocab, const TrainConfig& cfg, const TrainHooks& hooks) {
    cfg.validate();
    if (full_corpus.empty()) throw Error(ErrorCode::ConfigError, "empty training corpus");
    const auto used = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(cfg.train_fraction * static_cast<double>(full_corpus.size()) + 1e-9)));
    const std::vector<TrainingExample> corpus(full_corpus.begin(), full_corpus.begin() + static_cast<std::ptrdiff_t>(used));
    for (const auto& ex : corpus) {
        if (ex.enc.tokens.size() == 0) throw Error(ErrorCode::ConfigError, ex.id + " is not tokenized");
        if (ex.enc.tokens.size() > cfg.model.max_len) throw Error(ErrorCode::SequenceTooLong, ex.id + " exceeds max_len");
    }

    ModelConfig mc = cfg.model;
    mc.vocab_size = vocab.size();
    TrainResult result{ModelParams<float>::init(mc, CounterRng(cfg.seed).split(1)()), {}, {}, std::vector<std::size_t>(cfg.epochs, 0), 0};
    if (!cfg.weight_cache_path.empty()) result.cache = WeightCache::load(cfg.weight_cache_path);
    auto params = result.params.all();
    ad::AdamWState<float> opt;
    ad::AdamWConfig opt_cfg{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay};

    const std::size_t total_steps = cfg.max_steps ? std::min(cfg.max_steps, cfg.epochs * corpus.size()) : cfg.epochs * corpus.size();
    const std::size_t total_updates = (total_steps + cfg.grad_accum - 1) / cfg.grad_accum;
    const float accum_scale = 1.0f / static_cast<float>(cfg.grad_accum);
    std::size_t step = 0, pending = 0;

    auto update = [&]() {
        ad::clip_grad_norm(params, static_cast<float>(cfg.max_grad_norm));
        opt_cfg.lr = scheduled_lr(cfg, result.optimizer_steps, total_updates);
        ad::adamw_step(params, opt, opt_cfg);
        for (auto& p : params) p.zero_grad();
        ++result.optimizer_steps;
        pending = 0;
    };

    for (std::size_t epoch = 1; epoch <= cfg.epochs && step < total_steps; ++epoch) {
        std::vector<std::size_t> order(corpus.size());
        std::iota(order.begin(), order.end(), 0);
        CounterRng shuffle = CounterRng(cfg.seed).split(kShuffleStream).split(epoch);
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

        for (std::size_t idx : order) {
            if (step >= total_steps) break;
            const TrainingExample& ex = corpus[idx];
            const std::vector<double>* weights = nullptr;
            if (cfg.noise == NoiseMode::Confusion) {
                if (epoch == 1 && !result.cache.contains(ex.id)) {
                    result.cache.record(ex.id, capture_weights(result.params, ex));
                    ++result.capture_forwards[0];
                }
                weights = &result.cache.lookup(ex.id);
            }
            CounterRng rng = stream_for(cfg.seed, idx, epoch);
            const NoiseDraw draw = draw_step_noise(ex, weights, cfg, rng);

            const Span query = ex.enc.segments.range(Segment::Query);
            const auto rows = ntp_rows(query);
            const auto out = forward(result.params, ex.enc.tokens, step_mask(ex, draw.chosen), &rows);
            const auto sl = schema_linking_loss(out.marker_probs, ex.label, ex.enc.segments.marker);
            const auto ntp = ntp_loss(out.lm_logits, out.logit_rows, ex.enc.tokens, query);
            const auto loss = joint_loss(sl, ntp, cfg.loss_ratio);
            if (!std::isfinite(loss.item())) {
                throw Error(ErrorCode::NonFiniteLoss, "example " + ex.id + " at step " + std::to_string(step + 1) +
                                                          ": L_SL=" + std::to_string(sl.item()) + " L_NTP=" + std::to_string(ntp.item()));
            }
            ad::backward(ad::scale(loss, accum_scale));
            ++step;
            ++pending;

            StepLog log{step, epoch, ex.id, sl.item(), ntp.item(), draw.k, draw.chosen, 0.0, false};
            if (pending == cfg.grad_accum || step == total_steps) {
                update();
                log.optimizer_step = true;
                log.lr = opt_cfg.lr;
            }
            if (hooks.on_step) hooks.on_step(log);
            result.log.push_back(std::move(log));
        }
        if (epoch == 1 && !cfg.weight_cache_path.empty() && cfg.noise == NoiseMode::Confusion) result.cache.save(cfg.weight_cache_path);
        if (hooks.on_epoch_end) hooks.on_epoch_end(epoch, result.cache);
    }
    if (pending) update();
    return result;
}

LinkPrediction link_schema(const ModelParams<float>& params, const Encoding& enc, double threshold) {
    ad::NoGradGuard no_grad;
    SegmentMap seg = enc.segments;
    seg.gt_schema.assign(seg.size(), 0);
    seg.noisy_schema.assign(seg.size(), 0);
    const std::vector<std::size_t> none;
    const auto out = forward(params, enc.tokens, build_joint_mask(seg), &none);
    LinkPrediction pred;
    const auto markers = seg.marker_positions();
    for (std::size_t c = 0; c < markers.size(); ++c) {
        const double s = out.marker_probs.value()(static_cast<Eigen::Index>(markers[c]), 0);
        pred.scores.push_back(s);
        if (s > threshold) pred.predicted.push_back(c);
    }
    return pred;
}

TokenSequence prune_prompt(const Encoding& enc, const std::vector<std::size_t>& predicted) {
    if (predicted.empty()) throw Error(ErrorCode::EmptyPrediction, "no column predicted");
    const auto& seg = enc.segments;
    std::vector<std::vector<std::uint8_t>> keep_col(seg.tables.size());
    for (std::size_t t = 0; t < seg.tables.size(); ++t) keep_col[t].assign(seg.tables[t].columns.size(), 0);
    for (auto c : predicted) {
        const auto [t, k] = seg.locate(c);
        keep_col[t][k] = 1;
    }
    TokenSequence out;
    auto copy = [&](const Span& s) {
        for (std::size_t i = s.begin; i < s.end; ++i) {
            if (seg.marker[i]) continue;
            out.ids.push_back(enc.tokens.ids[i]);
            out.char_offsets.push_back(enc.tokens.char_offsets[i]);
            out.positions.push_back(enc.tokens.positions[i]);
            if (!enc.tokens.columns.empty()) out.columns.push_back(enc.tokens.columns[i]);
        }
    };
    copy(seg.range(Segment::Prefix));
    for (std::size_t t = 0; t < seg.tables.size(); ++t) {
        if (std::find(keep_col[t].begin(), keep_col[t].end(), 1) == keep_col[t].end()) continue;
        // Whole table range minus dropped definitions, so separators between elements survive.
        const auto& tt = seg.tables[t];
        std::size_t from = tt.header.begin;
        for (std::size_t k = 0; k < tt.columns.size(); ++k) {
            if (keep_col[t][k]) continue;
            copy({from, tt.columns[k].definition.begin});
            from = tt.columns[k].definition.end;
        }
        copy({from, tt.footer.end});
    }
    return out;
}

std::string detokenize_sql(const std::vector<std::string>& tokens) {
    static const std::set<std::string> kCalls = {"count", "avg", "sum", "min", "max"};
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const std::string& t = tokens[i];
        bool glue = t == "," || t == ")" || t == ".";
        if (t == "(" && i) glue = kCalls.count(to_lower(tokens[i - 1])) > 0;
        if (i && (tokens[i - 1] == "(" || tokens[i - 1] == ".")) glue = true;
        if (i && !glue) out += ' ';
        out += t;
    }
    return out;
}

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

InferenceResult generate_from_prediction(const ModelParams<float>& params, const Vocab& vocab, const Encoding& enc,
                                         const LinkPrediction& link, std::size_t max_new_tokens) {
    InferenceResult r;
    r.link = link;
    const auto& seg = enc.segments;
    for (auto c : link.predicted) {
        const auto [t, k] = seg.locate(c);
        r.predicted_columns.push_back(seg.tables[t].name + "." + seg.tables[t].columns[k].name);
    }
    std::vector<std::size_t> keep = link.predicted;
    if (keep.empty()) {
        r.fell_back = true;
        keep.resize(seg.column_count());
        std::iota(keep.begin(), keep.end(), 0);
    }
    r.pruned = prune_prompt(enc, keep);
    const auto t0 = std::chrono::steady_clock::now();
    const Span query = seg.range(Segment::Query);
    const auto first = static_cast<std::int32_t>(query.empty() ? enc.tokens.size() : query.begin);
    const std::size_t room = params.config.max_len > static_cast<std::size_t>(first) ? params.config.max_len - first : 0;
    TokenSequence prompt = r.pruned;
    prompt.ids.push_back(kBosId);
    prompt.positions.push_back(first);
    prompt.char_offsets.push_back({});
    if (!prompt.columns.empty()) prompt.columns.push_back(0);
    const auto seq = greedy_generate(params, prompt, room > 0 ? std::min(max_new_tokens, room - 1) : 0, kEosId, first + 1);
    std::vector<std::string> words;
    for (std::size_t i = prompt.size(); i < seq.size(); ++i) {
        if (seq.ids[i] == kEosId) break;
        words.push_back(vocab.token(seq.ids[i]));
    }
    r.sql = detokenize_sql(words);
    r.generate_ms = ms_since(t0);
    return r;
}

InferenceResult infer_encoded(const ModelParams<float>& params, const Vocab& vocab, const Encoding& enc, double threshold,
                              std::size_t max_new_tokens) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto link = link_schema(params, enc, threshold);
    const double link_ms = ms_since(t0);
    auto r = generate_from_prediction(params, vocab, enc, link, max_new_tokens);
    r.link_ms = link_ms;
    r.e2e_ms = ms_since(t0);
    return r;
}

InferenceResult infer(const ModelParams<float>& params, const Vocab& vocab, std::string_view question, const SerializedSchema& schema,
                      double threshold, std::size_t max_new_tokens) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto enc = encode(make_prefix(question), schema, "", vocab, params.config.max_len);
    auto r = infer_encoded(params, vocab, enc, threshold, max_new_tokens);
    r.e2e_ms = ms_since(t0);
    return r;
}

}  // namespace jolt
