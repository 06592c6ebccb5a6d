#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <set>

#include "fixtures/schema_fixtures.hpp"
#include "jolt/error.hpp"
#include "jolt/pipeline.hpp"

using namespace jolt;

namespace {

std::vector<TrainingExample> singer_corpus() {
    auto db = fixtures::singer_db();
    const auto doc = fixtures::singer_schema();
    std::vector<TrainingExample> out;
    out.push_back(build_training_example("s0", "name and age of singers", doc, "SELECT name , age FROM singer", &db, "singer"));
    out.push_back(build_training_example("s1", "concert_name in year 2014", doc, "SELECT concert_name FROM concert WHERE year = 2014", &db, "singer"));
    out.push_back(build_training_example("s2", "name of singers with concert", doc,
                                         "SELECT T1.name FROM singer AS T1 JOIN concert AS T2 ON T1.singer_id = T2.singer_id", &db, "singer"));
    return out;
}

TrainConfig tiny_train_config() {
    TrainConfig c;
    c.epochs = 2;
    c.grad_accum = 2;
    c.model.dim = 16;
    c.model.layers = 1;
    c.model.heads = 2;
    c.model.ffn_mult = 2;
    c.model.max_len = 256;
    return c;
}

struct Tokenized {
    std::vector<TrainingExample> corpus;
    Vocab vocab;
};

Tokenized tokenized_corpus() {
    Tokenized t{singer_corpus(), {}};
    t.vocab = build_vocab(t.corpus);
    for (auto& ex : t.corpus) tokenize_example(ex, t.vocab, 256);
    return t;
}

}  // namespace

TEST(Build, LinksAndLabels) {
    const auto c = singer_corpus();
    EXPECT_EQ(c[0].label, (std::vector<int>{0, 1, 0, 1, 0, 0, 0, 0}));
    EXPECT_EQ(c[0].gt_columns, (std::vector<std::size_t>{1, 3}));
    EXPECT_EQ(c[2].link.size(), 3u);
    EXPECT_NE(c[0].schema.text.find("'Joe Sharp'"), std::string::npos);
}

TEST(Build, CountStarIsDegenerate) {
    try {
        build_training_example("d", "how many singers", fixtures::singer_schema(), "SELECT count(*) FROM singer");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DegenerateExample);
    }
}

TEST(Build, TwoTableEnvelopeCoversBothTables) {
    auto t = tokenized_corpus();
    const auto& ex = t.corpus[2];
    const auto& seg = ex.enc.segments;
    for (const auto& table : seg.tables) {
        for (std::size_t i = table.header.begin; i < table.header.end; ++i) EXPECT_TRUE(seg.gt_schema[i]);
        for (std::size_t i = table.footer.begin; i < table.footer.end; ++i) EXPECT_TRUE(seg.gt_schema[i]);
    }
    // concert.concert_name is not referenced.
    const auto& cn = seg.tables[1].columns[1];
    for (std::size_t i = cn.definition.begin; i < cn.definition.end; ++i) EXPECT_FALSE(seg.gt_schema[i]);
}

TEST(Config, JsonRoundTripAndUnknownKey) {
    TrainConfig c = tiny_train_config();
    c.noise = NoiseMode::Random;
    const auto back = TrainConfig::from_json(c.to_json());
    EXPECT_EQ(back.to_json(), c.to_json());
    auto j = c.to_json();
    j["learning_rate"] = 1.0;
    EXPECT_THROW(TrainConfig::from_json(j), Error);
    j = c.to_json();
    j["beta"] = 1.0;
    EXPECT_THROW(TrainConfig::from_json(j), Error);
    EXPECT_THROW(noise_mode_from("gaussian"), Error);
}

TEST(Jsonl, RoundTripPreservesRecord) {
    const auto corpus = singer_corpus();
    const auto path = (std::filesystem::temp_directory_path() / "jolt_pipeline_rt.jsonl").string();
    write_jsonl(path, corpus);
    const auto back = read_jsonl(path);
    std::remove(path.c_str());
    ASSERT_EQ(back.size(), corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        EXPECT_EQ(back[i].label, corpus[i].label);
        EXPECT_EQ(back[i].link, corpus[i].link);
        EXPECT_EQ(back[i].schema.text, corpus[i].schema.text);
        ASSERT_EQ(back[i].schema.spans.tables.size(), corpus[i].schema.spans.tables.size());
        for (std::size_t t = 0; t < corpus[i].schema.spans.tables.size(); ++t) {
            const auto& a = back[i].schema.spans.tables[t];
            const auto& b = corpus[i].schema.spans.tables[t];
            EXPECT_EQ(a.header, b.header);
            EXPECT_EQ(a.footer, b.footer);
            ASSERT_EQ(a.columns.size(), b.columns.size());
            for (std::size_t k = 0; k < a.columns.size(); ++k) {
                EXPECT_EQ(a.columns[k].definition, b.columns[k].definition);
                EXPECT_EQ(a.columns[k].marker, b.columns[k].marker);
            }
        }
        EXPECT_EQ(example_to_json(back[i]), example_to_json(corpus[i]));
    }
}

TEST(Jsonl, QuerySpanResolvesToGoldSql) {
    auto t = tokenized_corpus();
    const auto& ex = t.corpus[1];
    const auto j = example_to_json(ex);
    const Span q{j["query_span"][0].get<std::size_t>(), j["query_span"][1].get<std::size_t>()};
    const std::string text = j["text"];
    const auto& off = ex.enc.tokens.char_offsets;
    EXPECT_EQ(text.substr(off[q.begin].begin, off[q.end - 1].end - off[q.begin].begin), ex.gold_sql);
    EXPECT_EQ(ex.enc.tokens.ids[q.end], kEosId);
}

TEST(Jsonl, InconsistentRecordRejected) {
    auto j = example_to_json(singer_corpus()[0]);
    j["label"] = std::vector<int>{1, 1, 0, 1, 0, 0, 0, 0};
    EXPECT_THROW(example_from_json(j), Error);
}

TEST(Noise, NoneModeDrawsNothing) {
    auto t = tokenized_corpus();
    TrainConfig c = tiny_train_config();
    c.noise = NoiseMode::None;
    CounterRng rng(3);
    for (int i = 0; i < 50; ++i) EXPECT_EQ(draw_step_noise(t.corpus[0], nullptr, c, rng).k, 0u);
}

TEST(Noise, StepMaskIsFreshPerDraw) {
    auto t = tokenized_corpus();
    const auto& ex = t.corpus[0];
    const auto base = step_mask(ex, {});
    const auto noisy = step_mask(ex, {5});
    const auto again = step_mask(ex, {});
    const auto q = ex.enc.segments.range(Segment::Query);
    const auto def = ex.enc.segments.tables[1].columns[1].definition;
    EXPECT_FALSE(base(q.begin, def.begin));
    EXPECT_TRUE(noisy(q.begin, def.begin));
    EXPECT_FALSE(again(q.begin, def.begin));
    // The example's own flags stay untouched.
    EXPECT_FALSE(ex.enc.segments.noisy_schema[def.begin]);
}

TEST(Train, CapturesOnlyInFirstEpoch) {
    auto t = tokenized_corpus();
    TrainConfig c = tiny_train_config();
    c.epochs = 3;
    const auto r = train(t.corpus, t.vocab, c);
    ASSERT_EQ(r.capture_forwards.size(), 3u);
    EXPECT_EQ(r.capture_forwards[0], t.corpus.size());
    EXPECT_EQ(r.capture_forwards[1], 0u);
    EXPECT_EQ(r.capture_forwards[2], 0u);
    EXPECT_EQ(r.cache.size(), t.corpus.size());
    EXPECT_EQ(r.log.size(), 9u);
    EXPECT_EQ(r.optimizer_steps, 5u);  // accumulation runs across epoch boundaries: ceil(9 / 2)
}

TEST(Train, NoisyColumnsNeverGtAndWithinBound) {
    auto t = tokenized_corpus();
    TrainConfig c = tiny_train_config();
    c.epochs = 4;
    c.beta = 0.5;
    const auto r = train(t.corpus, t.vocab, c);
    std::map<std::string, const TrainingExample*> by_id;
    for (const auto& ex : t.corpus) by_id[ex.id] = &ex;
    for (const auto& s : r.log) {
        const auto& ex = *by_id.at(s.example_id);
        EXPECT_LE(s.k, noise_bound(ex.label.size(), c.beta));
        EXPECT_EQ(s.noisy.size(), s.k);
        std::set<std::size_t> uniq(s.noisy.begin(), s.noisy.end());
        EXPECT_EQ(uniq.size(), s.noisy.size());
        for (auto n : s.noisy) EXPECT_EQ(ex.label[n], 0);
        EXPECT_TRUE(std::isfinite(s.l_sl));
        EXPECT_TRUE(std::isfinite(s.l_ntp));
    }
}

TEST(Train, RandomModeSkipsCapture) {
    auto t = tokenized_corpus();
    TrainConfig c = tiny_train_config();
    c.noise = NoiseMode::Random;
    const auto r = train(t.corpus, t.vocab, c);
    EXPECT_EQ(r.capture_forwards[0], 0u);
    EXPECT_EQ(r.cache.size(), 0u);
}

TEST(Train, DeterministicForSeed) {
    auto t = tokenized_corpus();
    const auto c = tiny_train_config();
    const auto a = train(t.corpus, t.vocab, c);
    const auto b = train(t.corpus, t.vocab, c);
    ASSERT_EQ(a.log.size(), b.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i) {
        EXPECT_EQ(a.log[i].example_id, b.log[i].example_id);
        EXPECT_EQ(a.log[i].noisy, b.log[i].noisy);
        EXPECT_EQ(a.log[i].l_sl, b.log[i].l_sl);
    }
    EXPECT_TRUE(a.params.token_embedding.value() == b.params.token_embedding.value());
}

TEST(Train, CachePersistsAndIsReused) {
    auto t = tokenized_corpus();
    TrainConfig c = tiny_train_config();
    const auto path = (std::filesystem::temp_directory_path() / "jolt_pipeline_cache.json").string();
    std::remove(path.c_str());
    c.weight_cache_path = path;
    const auto a = train(t.corpus, t.vocab, c);
    EXPECT_EQ(a.capture_forwards[0], t.corpus.size());
    const auto b = train(t.corpus, t.vocab, c);
    EXPECT_EQ(b.capture_forwards[0], 0u);
    EXPECT_TRUE(a.cache == b.cache);
    std::remove(path.c_str());
}

TEST(Train, UntokenizedCorpusRejected) {
    auto corpus = singer_corpus();
    EXPECT_THROW(train(corpus, build_vocab(corpus), tiny_train_config()), Error);
}

TEST(Prune, KeepsPredictedDefinitionsOnly) {
    auto t = tokenized_corpus();
    const auto& enc = t.corpus[0].enc;
    const auto pruned = prune_prompt(enc, {1, 3});
    const std::string text = decode(pruned.ids, t.vocab);
    EXPECT_EQ(text.find("<|marker|>"), std::string::npos);
    EXPECT_EQ(text.find("concert"), std::string::npos);  // no column of concert kept
    EXPECT_NE(text.find("name TEXT"), std::string::npos);
    EXPECT_EQ(text.find("country"), std::string::npos);
    EXPECT_NE(text.find("PRIMARY KEY"), std::string::npos);
    // Positions are a strictly increasing subsequence of the originals.
    for (std::size_t i = 1; i < pruned.size(); ++i) EXPECT_LT(pruned.positions[i - 1], pruned.positions[i]);
    for (std::size_t i = 0; i < pruned.size(); ++i) {
        EXPECT_EQ(enc.tokens.ids[static_cast<std::size_t>(pruned.positions[i])], pruned.ids[i]);
    }
}

TEST(Prune, EveryColumnEqualsFullSchemaWithoutMarkers) {
    auto t = tokenized_corpus();
    const auto& enc = t.corpus[0].enc;
    std::vector<std::size_t> all(enc.segments.column_count());
    std::iota(all.begin(), all.end(), 0);
    const auto pruned = prune_prompt(enc, all);
    const auto q = enc.segments.range(Segment::Query);
    std::vector<TokenId> expect;
    for (std::size_t i = 0; i < q.begin; ++i) {
        if (!enc.segments.marker[i]) expect.push_back(enc.tokens.ids[i]);
    }
    EXPECT_EQ(decode(pruned.ids, t.vocab), decode(expect, t.vocab));
}

TEST(Prune, EmptyPredictionThrows) {
    auto t = tokenized_corpus();
    try {
        prune_prompt(t.corpus[0].enc, {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyPrediction);
    }
}

TEST(Infer, ThresholdExtremes) {
    auto t = tokenized_corpus();
    ModelConfig mc = tiny_train_config().model;
    mc.vocab_size = t.vocab.size();
    const auto params = ModelParams<float>::init(mc, 5);
    const auto& enc = t.corpus[0].enc;
    const auto none = link_schema(params, enc, 1.0);
    EXPECT_TRUE(none.predicted.empty());
    EXPECT_EQ(none.scores.size(), enc.segments.column_count());
    const auto all = link_schema(params, enc, 0.0);
    EXPECT_EQ(all.predicted.size(), enc.segments.column_count());

    const auto fb = generate_from_prediction(params, t.vocab, enc, none, 4);
    EXPECT_TRUE(fb.fell_back);
    const auto full = generate_from_prediction(params, t.vocab, enc, all, 4);
    EXPECT_FALSE(full.fell_back);
    EXPECT_EQ(fb.pruned.ids, full.pruned.ids);
    EXPECT_EQ(full.predicted_columns.size(), 8u);
    EXPECT_EQ(full.predicted_columns[0], "singer.singer_id");
}

TEST(Infer, QuerySegmentDoesNotChangeLinking) {
    auto t = tokenized_corpus();
    ModelConfig mc = tiny_train_config().model;
    mc.vocab_size = t.vocab.size();
    const auto params = ModelParams<float>::init(mc, 5);
    const auto& ex = t.corpus[0];
    const auto with_query = link_schema(params, ex.enc, 0.5);
    const auto bare = encode(ex.prefix, ex.schema, "", t.vocab, 256);
    const auto without = link_schema(params, bare, 0.5);
    ASSERT_EQ(with_query.scores.size(), without.scores.size());
    for (std::size_t i = 0; i < without.scores.size(); ++i) EXPECT_NEAR(with_query.scores[i], without.scores[i], 1e-5);
}

TEST(Detokenize, Spacing) {
    EXPECT_EQ(detokenize_sql({"SELECT", "count", "(", "*", ")", "FROM", "T1", ".", "a", ",", "b"}), "SELECT count(*) FROM T1.a, b");
    EXPECT_EQ(detokenize_sql({"WHERE", "x", "IN", "(", "SELECT", "y", ")"}), "WHERE x IN (SELECT y)");
    EXPECT_EQ(detokenize_sql({}), "");
}

TEST(Overfit, ThreeExamplesLinkedAndGenerated) {
    auto t = tokenized_corpus();
    TrainConfig c = tiny_train_config();
    c.model.dim = 32;
    c.model.heads = 4;
    c.model.layers = 2;
    c.epochs = 200;
    c.grad_accum = 1;
    c.lr = 3e-3;
    c.lr_schedule = "constant";
    c.weight_decay = 0.0;
    const auto r = train(t.corpus, t.vocab, c);
    for (const auto& ex : t.corpus) {
        const auto link = link_schema(r.params, ex.enc, 0.5);
        EXPECT_EQ(link.predicted, ex.gt_columns) << ex.id;
        const auto gen = infer_encoded(r.params, t.vocab, ex.enc, 0.5, 40);
        std::vector<std::string> words;
        for (const auto& w : split_words(ex.gold_sql)) words.push_back(w.text);
        EXPECT_EQ(gen.sql, detokenize_sql(words)) << ex.id;
    }
}
