#include "jolt/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "jolt/error.hpp"
#include "jolt/rng.hpp"

namespace jolt {

void ModelConfig::validate() const {
    if (vocab_size < 5 || dim == 0 || layers == 0 || heads == 0 || ffn_mult == 0 || max_len == 0) {
        throw Error(ErrorCode::ConfigError, "model extents must be positive and the vocab must hold the reserved ids");
    }
    if (dim % heads) throw Error(ErrorCode::ConfigError, "dim " + std::to_string(dim) + " not divisible by heads " + std::to_string(heads));
    if (rotary && (dim / heads) % 2) throw Error(ErrorCode::ConfigError, "rotary encoding needs an even head width");
}

nlohmann::json ModelConfig::to_json() const {
    return {{"vocab_size", vocab_size}, {"dim", dim},         {"layers", layers},
            {"heads", heads},           {"ffn_mult", ffn_mult}, {"max_len", max_len},
            {"link_bias_init", link_bias_init}, {"distance_bias", distance_bias}, {"directional_bias", directional_bias}, {"rotary", rotary}, {"column_slots", column_slots}, {"fan_in_init", fan_in_init}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    ModelConfig c;
    for (const auto& [key, v] : j.items()) {
        if (key == "vocab_size") c.vocab_size = v.get<std::size_t>();
        else if (key == "dim") c.dim = v.get<std::size_t>();
        else if (key == "layers") c.layers = v.get<std::size_t>();
        else if (key == "heads") c.heads = v.get<std::size_t>();
        else if (key == "ffn_mult") c.ffn_mult = v.get<std::size_t>();
        else if (key == "max_len") c.max_len = v.get<std::size_t>();
        else if (key == "link_bias_init") c.link_bias_init = v.get<double>();
        else if (key == "distance_bias") c.distance_bias = v.get<bool>();
        else if (key == "rotary") c.rotary = v.get<bool>();
        else if (key == "column_slots") c.column_slots = v.get<std::size_t>();
        else if (key == "directional_bias") c.directional_bias = v.get<bool>();
        else if (key == "fan_in_init") c.fan_in_init = v.get<bool>();
        else throw Error(ErrorCode::ConfigError, "unknown model key '" + key + "'");
    }
    c.validate();
    return c;
}

namespace {

template <class T>
ad::Tensor<T> normal_param(CounterRng& rng, std::size_t r, std::size_t c, double std) {
    ad::Mat<T> m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = static_cast<T>(rng.normal() * std);
    return ad::Tensor<T>::parameter(std::move(m));
}

template <class T>
ad::Tensor<T> const_param(std::size_t r, std::size_t c, double v) {
    return ad::Tensor<T>::parameter(ad::Mat<T>::Constant(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c), static_cast<T>(v)));
}

}  // namespace

template <class T>
ModelParams<T> ModelParams<T>::init(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    CounterRng rng(seed);
    const std::size_t d = config.dim, f = config.dim * config.ffn_mult;
    const double s = 0.02, depth = std::sqrt(2.0 * static_cast<double>(config.layers));
    const double s_d = config.fan_in_init ? 1.0 / std::sqrt(static_cast<double>(d)) : s;
    const double s_f = config.fan_in_init ? 1.0 / std::sqrt(static_cast<double>(f)) : s;
    ModelParams p;
    p.config = config;
    p.token_embedding = normal_param<T>(rng, config.vocab_size, d, s);
    p.position_embedding = normal_param<T>(rng, config.max_len, d, s);
    if (config.column_slots) p.column_embedding = normal_param<T>(rng, config.column_slots + 1, d, s);
    for (std::size_t l = 0; l < config.layers; ++l) {
        LayerParams<T> lp;
        lp.ln1_gain = const_param<T>(1, d, 1);
        lp.ln1_bias = const_param<T>(1, d, 0);
        lp.wq = normal_param<T>(rng, d, d, s_d);
        lp.wk = normal_param<T>(rng, d, d, s_d);
        lp.wv = normal_param<T>(rng, d, d, s_d);
        lp.wo = normal_param<T>(rng, d, d, s_d / depth);
        lp.ln2_gain = const_param<T>(1, d, 1);
        lp.ln2_bias = const_param<T>(1, d, 0);
        lp.ffn_in = normal_param<T>(rng, d, f, s_d);
        lp.ffn_in_bias = const_param<T>(1, f, 0);
        lp.ffn_out = normal_param<T>(rng, f, d, s_f / depth);
        lp.ffn_out_bias = const_param<T>(1, d, 0);
        p.layers.push_back(std::move(lp));
    }
    p.final_gain = const_param<T>(1, d, 1);
    p.final_bias = const_param<T>(1, d, 0);
    p.link_weight = normal_param<T>(rng, d, 1, s);
    p.link_bias = const_param<T>(1, 1, config.link_bias_init);
    return p;
}

template <class T>
std::vector<ad::Tensor<T>> ModelParams<T>::all() const {
    std::vector<ad::Tensor<T>> out{token_embedding, position_embedding};
    if (config.column_slots) out.push_back(column_embedding);
    for (const auto& l : layers) {
        for (const auto* t : {&l.ln1_gain, &l.ln1_bias, &l.wq, &l.wk, &l.wv, &l.wo, &l.ln2_gain, &l.ln2_bias, &l.ffn_in, &l.ffn_in_bias,
                              &l.ffn_out, &l.ffn_out_bias}) {
            out.push_back(*t);
        }
    }
    for (const auto* t : {&final_gain, &final_bias, &link_weight, &link_bias}) out.push_back(*t);
    return out;
}

template <class T>
std::size_t ModelParams<T>::parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : all()) n += t.rows() * t.cols();
    return n;
}

template <class T>
ModelParams<T> ModelParams<T>::clone() const {
    return cast<T>();
}

template struct ModelParams<float>;
template struct ModelParams<double>;

namespace {
constexpr double kSidePenalty = 4.0;
}  // namespace

template <class T>
ForwardOutput<T> forward(const ModelParams<T>& params, const TokenSequence& tokens, const AttentionMask& mask,
                         const std::vector<std::size_t>* logit_rows) {
    const auto& cfg = params.config;
    const std::size_t n = tokens.size();
    if (n == 0) throw Error(ErrorCode::ShapeMismatch, "empty token sequence");
    if (mask.size() != n) throw Error(ErrorCode::ShapeMismatch, "mask is " + std::to_string(mask.size()) + " but sequence has " + std::to_string(n));
    if (tokens.positions.size() != n) throw Error(ErrorCode::ShapeMismatch, "positions do not cover the sequence");
    for (std::size_t i = 0; i < n; ++i) {
        if (tokens.positions[i] < 0 || static_cast<std::size_t>(tokens.positions[i]) >= cfg.max_len) {
            throw Error(ErrorCode::ShapeMismatch, "position " + std::to_string(tokens.positions[i]) + " beyond max_len");
        }
        if (tokens.ids[i] < 0 || static_cast<std::size_t>(tokens.ids[i]) >= cfg.vocab_size) {
            throw Error(ErrorCode::ShapeMismatch, "token id " + std::to_string(tokens.ids[i]) + " beyond vocab");
        }
    }

    using ad::Tensor;
    Tensor<T> x = ad::gather_rows(params.token_embedding, tokens.ids);
    if (!cfg.rotary) x = ad::add(x, ad::gather_rows(params.position_embedding, tokens.positions));
    if (cfg.column_slots && !tokens.columns.empty()) {
        if (tokens.columns.size() != n) throw Error(ErrorCode::ShapeMismatch, "column slots do not cover the sequence");
        for (auto c : tokens.columns) {
            if (c < 0 || static_cast<std::size_t>(c) > cfg.column_slots) {
                throw Error(ErrorCode::ShapeMismatch, "column slot " + std::to_string(c) + " beyond " + std::to_string(cfg.column_slots));
            }
        }
        x = ad::add(x, ad::gather_rows(params.column_embedding, tokens.columns));
    }
    const std::size_t dh = cfg.dim / cfg.heads;
    // Rotary: pair (2m, 2m+1) of every head turns by p * 10000^(-2m/dh); x' = x*C + (x R)*S.
    Tensor<T> rot_cos, rot_sin, rot_swap;
    if (cfg.rotary) {
        ad::Mat<T> c(n, dh), s(n, dh), r = ad::Mat<T>::Zero(dh, dh);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t m = 0; m < dh / 2; ++m) {
                const double angle = tokens.positions[i] * std::pow(10000.0, -2.0 * static_cast<double>(m) / static_cast<double>(dh));
                c(i, 2 * m) = c(i, 2 * m + 1) = static_cast<T>(std::cos(angle));
                s(i, 2 * m) = s(i, 2 * m + 1) = static_cast<T>(std::sin(angle));
            }
        }
        for (std::size_t m = 0; m < dh / 2; ++m) {
            r(2 * m + 1, 2 * m) = T(-1);
            r(2 * m, 2 * m + 1) = T(1);
        }
        rot_cos = Tensor<T>::constant(std::move(c));
        rot_sin = Tensor<T>::constant(std::move(s));
        rot_swap = Tensor<T>::constant(std::move(r));
    }
    auto rotate = [&](const Tensor<T>& t) { return cfg.rotary ? ad::add(ad::mul(t, rot_cos), ad::mul(ad::matmul(t, rot_swap), rot_sin)) : t; };
    const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dh));
    // Head hd penalizes attention by slope_hd * |p_i - p_j|; slopes halve geometrically across heads.
    std::vector<Tensor<T>> distance_bias;
    if (cfg.distance_bias) {
        for (std::size_t hd = 0; hd < cfg.heads; ++hd) {
            const double slope = std::exp2(-8.0 * static_cast<double>(hd + 1) / static_cast<double>(cfg.heads));
            ad::Mat<T> bias(n, n);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    const int delta = tokens.positions[j] - tokens.positions[i];
                    double b = -slope * std::abs(delta);
                    if (cfg.directional_bias && (hd % 2 == 0 ? delta > 0 : delta < 0)) b -= kSidePenalty;
                    bias(i, j) = static_cast<T>(b);
                }
            }
            distance_bias.push_back(Tensor<T>::constant(std::move(bias)));
        }
    }
    for (const auto& l : params.layers) {
        const Tensor<T> h = ad::layer_norm(x, l.ln1_gain, l.ln1_bias);
        const Tensor<T> q = ad::matmul(h, l.wq), k = ad::matmul(h, l.wk), v = ad::matmul(h, l.wv);
        std::vector<Tensor<T>> heads;
        for (std::size_t hd = 0; hd < cfg.heads; ++hd) {
            const auto b = hd * dh, e = b + dh;
            Tensor<T> scores = ad::scale(ad::matmul(rotate(ad::slice(q, 1, b, e)), ad::transpose(rotate(ad::slice(k, 1, b, e)))), inv_sqrt);
            if (cfg.distance_bias) scores = ad::add(scores, distance_bias[hd]);
            heads.push_back(ad::matmul(ad::masked_softmax(scores, mask), ad::slice(v, 1, b, e)));
        }
        x = ad::add(x, ad::matmul(cfg.heads == 1 ? heads[0] : ad::concat(heads, 1), l.wo));
        const Tensor<T> h2 = ad::layer_norm(x, l.ln2_gain, l.ln2_bias);
        const Tensor<T> ff = ad::gelu(ad::add_row(ad::matmul(h2, l.ffn_in), l.ffn_in_bias));
        x = ad::add(x, ad::add_row(ad::matmul(ff, l.ffn_out), l.ffn_out_bias));
    }

    ForwardOutput<T> out;
    out.hidden = ad::layer_norm(x, params.final_gain, params.final_bias);
    out.marker_probs = ad::sigmoid(ad::add_row(ad::matmul(out.hidden, params.link_weight), params.link_bias));
    if (logit_rows) {
        out.logit_rows = *logit_rows;
    } else {
        out.logit_rows.resize(n);
        for (std::size_t i = 0; i < n; ++i) out.logit_rows[i] = i;
    }
    if (!out.logit_rows.empty()) {
        out.lm_logits = ad::matmul(ad::gather_rows(out.hidden, out.logit_rows), ad::transpose(params.token_embedding));
    }
    return out;
}

template ForwardOutput<float> forward(const ModelParams<float>&, const TokenSequence&, const AttentionMask&, const std::vector<std::size_t>*);
template ForwardOutput<double> forward(const ModelParams<double>&, const TokenSequence&, const AttentionMask&,
                                       const std::vector<std::size_t>*);

std::vector<std::size_t> ntp_rows(const Span& query) {
    if (query.empty()) throw Error(ErrorCode::EmptyQuery, "query range is empty");
    if (query.begin == 0) throw Error(ErrorCode::EmptyQuery, "the first query token needs a preceding position");
    std::vector<std::size_t> rows;
    for (std::size_t i = query.begin; i < query.end; ++i) rows.push_back(i - 1);
    return rows;
}

template <class T>
ad::Tensor<T> schema_linking_loss(const ad::Tensor<T>& marker_probs, const std::vector<int>& labels, const std::vector<std::uint8_t>& marker) {
    if (marker.size() != marker_probs.rows()) throw Error(ErrorCode::LengthMismatch, "marker mask does not cover the probabilities");
    std::vector<std::size_t> at;
    for (std::size_t i = 0; i < marker.size(); ++i) {
        if (marker[i]) at.push_back(i);
    }
    if (at.empty()) throw Error(ErrorCode::NoMarkers, "no marker positions");
    if (labels.size() != at.size()) {
        throw Error(ErrorCode::LengthMismatch, std::to_string(labels.size()) + " labels for " + std::to_string(at.size()) + " markers");
    }
    return ad::bce_loss(ad::gather_rows(marker_probs, at), labels);
}

template ad::Tensor<float> schema_linking_loss(const ad::Tensor<float>&, const std::vector<int>&, const std::vector<std::uint8_t>&);
template ad::Tensor<double> schema_linking_loss(const ad::Tensor<double>&, const std::vector<int>&, const std::vector<std::uint8_t>&);

template <class T>
ad::Tensor<T> ntp_loss(const ad::Tensor<T>& lm_logits, const std::vector<std::size_t>& logit_rows, const TokenSequence& tokens,
                       const Span& query) {
    const auto needed = ntp_rows(query);
    if (query.end > tokens.size()) throw Error(ErrorCode::ShapeMismatch, "query range beyond the sequence");
    std::vector<std::size_t> rows;
    std::vector<TokenId> targets;
    for (std::size_t k = 0; k < needed.size(); ++k) {
        std::size_t row = needed[k];
        if (!logit_rows.empty()) {
            const auto it = std::find(logit_rows.begin(), logit_rows.end(), needed[k]);
            if (it == logit_rows.end()) throw Error(ErrorCode::ShapeMismatch, "no logits at position " + std::to_string(needed[k]));
            row = static_cast<std::size_t>(it - logit_rows.begin());
        }
        rows.push_back(row);
        targets.push_back(tokens.ids[query.begin + k]);
    }
    return ad::cross_entropy(ad::gather_rows(lm_logits, rows), targets);
}

template ad::Tensor<float> ntp_loss(const ad::Tensor<float>&, const std::vector<std::size_t>&, const TokenSequence&, const Span&);
template ad::Tensor<double> ntp_loss(const ad::Tensor<double>&, const std::vector<std::size_t>&, const TokenSequence&, const Span&);

template <class T>
ad::Tensor<T> joint_loss(const ad::Tensor<T>& sl, const ad::Tensor<T>& ntp, double ratio) {
    return ad::add(sl, ratio == 1.0 ? ntp : ad::scale(ntp, static_cast<T>(ratio)));
}

template ad::Tensor<float> joint_loss(const ad::Tensor<float>&, const ad::Tensor<float>&, double);
template ad::Tensor<double> joint_loss(const ad::Tensor<double>&, const ad::Tensor<double>&, double);

TokenSequence greedy_generate(const ModelParams<float>& params, const TokenSequence& prompt, std::size_t max_new, TokenId stop_id,
                              std::int32_t first_position) {
    if (prompt.size() == 0) throw Error(ErrorCode::ShapeMismatch, "empty prompt");
    ad::NoGradGuard no_grad;
    TokenSequence seq = prompt;
    std::int32_t next_pos = first_position >= 0 ? first_position : prompt.positions.back() + 1;
    for (std::size_t step = 0; step < max_new; ++step) {
        if (static_cast<std::size_t>(next_pos) >= params.config.max_len) break;
        const std::vector<std::size_t> last{seq.size() - 1};
        const auto out = forward(params, seq, build_causal_mask(seq.size()), &last);
        const auto& logits = out.lm_logits.value();
        Eigen::Index best = 0;
        for (Eigen::Index v = 1; v < logits.cols(); ++v) {
            if (logits(0, v) > logits(0, best)) best = v;
        }
        const Span prev = seq.char_offsets.empty() ? Span{} : seq.char_offsets.back();
        seq.ids.push_back(static_cast<TokenId>(best));
        seq.positions.push_back(next_pos++);
        if (!seq.columns.empty()) seq.columns.push_back(0);
        seq.char_offsets.push_back({prev.end, prev.end});
        if (static_cast<TokenId>(best) == stop_id) break;
    }
    return seq;
}

namespace {

constexpr char kMagic[8] = {'J', 'O', 'L', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <class V>
void put(std::ostream& os, const V& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <class V>
V get(std::istream& is) {
    V v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(V))) throw Error(ErrorCode::FormatError, "checkpoint truncated");
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams<float>& params, const Vocab& vocab) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(ErrorCode::IoError, "cannot write " + path);
    const std::string header = nlohmann::json{{"config", params.config.to_json()}, {"vocab", vocab.to_json()}}.dump();
    os.write(kMagic, sizeof kMagic);
    put(os, kVersion);
    put(os, static_cast<std::uint64_t>(header.size()));
    os.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (const auto& t : params.all()) {
        put(os, static_cast<std::uint64_t>(t.rows()));
        put(os, static_cast<std::uint64_t>(t.cols()));
        os.write(reinterpret_cast<const char*>(t.value().data()), static_cast<std::streamsize>(t.value().size() * sizeof(float)));
    }
    if (!os) throw Error(ErrorCode::IoError, "failed writing " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error(ErrorCode::IoError, "cannot read " + path);
    char magic[sizeof kMagic];
    if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
        throw Error(ErrorCode::FormatError, path + " is not a checkpoint");
    }
    if (const auto v = get<std::uint32_t>(is); v != kVersion) throw Error(ErrorCode::FormatError, "unsupported checkpoint version " + std::to_string(v));
    std::string header(get<std::uint64_t>(is), '\0');
    if (!is.read(header.data(), static_cast<std::streamsize>(header.size()))) throw Error(ErrorCode::FormatError, "checkpoint truncated");
    nlohmann::json h;
    try {
        h = nlohmann::json::parse(header);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::FormatError, std::string("checkpoint header: ") + e.what());
    }
    Checkpoint ck{ModelParams<float>::init(ModelConfig::from_json(h.at("config")), 0), Vocab::from_json(h.at("vocab"))};
    for (auto& t : ck.params.all()) {
        const auto r = get<std::uint64_t>(is), c = get<std::uint64_t>(is);
        if (r != t.rows() || c != t.cols()) throw Error(ErrorCode::FormatError, "tensor shape differs from the config");
        auto& v = t.mutable_value();
        if (!is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)))) {
            throw Error(ErrorCode::FormatError, "checkpoint truncated");
        }
    }
    if (ck.vocab.size() != ck.params.config.vocab_size) throw Error(ErrorCode::FormatError, "vocab size differs from the config");
    return ck;
}

}  // namespace jolt
