#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "jolt/autodiff.hpp"
#include "jolt/mask.hpp"
#include "jolt/tokenizer.hpp"
#include "json.hpp"

namespace jolt {

struct ModelConfig {
    std::size_t vocab_size = 2000;
    std::size_t dim = 64;
    std::size_t layers = 2;
    std::size_t heads = 4;
    std::size_t ffn_mult = 4;
    std::size_t max_len = kDefaultMaxLen;
    /// Starting bias of the linking head; sigmoid(-2) ~= 0.12 keeps early BCE unsaturated.
    double link_bias_init = -2.0;
    /// Adds a fixed per-head linear penalty on position distance to attention
    /// scores, on top of the learned positions. Off by default.
    bool distance_bias = false;
    /// With distance_bias: even heads add a flat penalty to later positions,
    /// odd heads to earlier ones, so a head can prefer one side.
    bool directional_bias = false;
    /// Rotary position encoding of queries and keys in place of the learned
    /// position table (which is then kept but unused). Off by default.
    bool rotary = false;
    /// When positive, a learned embedding per column slot (row 0: outside any
    /// column) is added to every token of a column definition, marker included.
    /// Sequences may hold at most this many columns.
    std::size_t column_slots = 0;
    /// Projection weights drawn with std 1/sqrt(fan_in) instead of a flat 0.02,
    /// so attention is not near-uniform at the start of a short run.
    bool fan_in_init = false;

    /// Throws ConfigError unless every extent is positive and dim % heads == 0.
    void validate() const;
    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
};

template <class T>
struct LayerParams {
    ad::Tensor<T> ln1_gain, ln1_bias;
    ad::Tensor<T> wq, wk, wv, wo;
    ad::Tensor<T> ln2_gain, ln2_bias;
    ad::Tensor<T> ffn_in, ffn_in_bias, ffn_out, ffn_out_bias;
};

/// Pre-norm decoder stack. The LM head is tied to the token embedding.
template <class T>
struct ModelParams {
    ModelConfig config;
    ad::Tensor<T> token_embedding;     // V x d
    ad::Tensor<T> position_embedding;  // max_len x d
    ad::Tensor<T> column_embedding;    // (column_slots + 1) x d; absent when column_slots == 0
    std::vector<LayerParams<T>> layers;
    ad::Tensor<T> final_gain, final_bias;
    ad::Tensor<T> link_weight;  // d x 1
    ad::Tensor<T> link_bias;    // 1 x 1

    /// N(0, 0.02) weights (residual projections scaled by 1/sqrt(2L)), unit gains, zero biases.
    static ModelParams init(const ModelConfig& config, std::uint64_t seed);

    /// Every trainable tensor in a fixed order (the checkpoint order).
    std::vector<ad::Tensor<T>> all() const;
    std::size_t parameter_count() const;
    /// Independent copy with fresh graph nodes.
    ModelParams clone() const;
    /// Copy converted to another scalar type.
    template <class U>
    ModelParams<U> cast() const;
};

template <class T>
struct ForwardOutput {
    ad::Tensor<T> hidden;        // n x d, after the final norm
    ad::Tensor<T> lm_logits;     // one row per entry of logit_rows
    std::vector<std::size_t> logit_rows;
    ad::Tensor<T> marker_probs;  // n x 1, sigmoid(W h_i + b) at every position
};

/// Runs the stack under `mask`. LM logits are computed only at `logit_rows`
/// (all positions when null). Token positions index the learned position table.
template <class T>
ForwardOutput<T> forward(const ModelParams<T>& params, const TokenSequence& tokens, const AttentionMask& mask,
                         const std::vector<std::size_t>* logit_rows = nullptr);

/// Rows whose logits predict the tokens of `query`: each query token at i is predicted from row i - 1.
std::vector<std::size_t> ntp_rows(const Span& query);

/// Mean BCE over positions flagged in `marker`; labels follow marker order.
/// Throws NoMarkers when nothing is flagged, LengthMismatch when labels disagree in count.
template <class T>
ad::Tensor<T> schema_linking_loss(const ad::Tensor<T>& marker_probs, const std::vector<int>& labels,
                                  const std::vector<std::uint8_t>& marker);

/// Mean next-token cross-entropy over the query tokens only. `logit_rows` maps
/// logits rows to positions (empty: row i is position i). Throws EmptyQuery.
template <class T>
ad::Tensor<T> ntp_loss(const ad::Tensor<T>& lm_logits, const std::vector<std::size_t>& logit_rows, const TokenSequence& tokens,
                       const Span& query);

/// L_SL + ratio * L_NTP; ratio 1 is the plain sum.
template <class T>
ad::Tensor<T> joint_loss(const ad::Tensor<T>& sl, const ad::Tensor<T>& ntp, double ratio = 1.0);

/// Argmax decoding under a causal mask until stop_id or max_new tokens. New
/// tokens take positions first_position, first_position + 1, ... (default:
/// one past the last prompt position). Ties go to the lowest id. Returns the
/// prompt followed by the generated tokens.
TokenSequence greedy_generate(const ModelParams<float>& params, const TokenSequence& prompt, std::size_t max_new, TokenId stop_id,
                              std::int32_t first_position = -1);

/// Binary checkpoint: magic, version, JSON header {config, vocab}, then every tensor as f32.
void save_checkpoint(const std::string& path, const ModelParams<float>& params, const Vocab& vocab);

struct Checkpoint {
    ModelParams<float> params;
    Vocab vocab;
};

Checkpoint load_checkpoint(const std::string& path);

template <class T>
template <class U>
ModelParams<U> ModelParams<T>::cast() const {
    ModelParams<U> out;
    out.config = config;
    auto conv = [](const ad::Tensor<T>& t) { return ad::Tensor<U>::parameter(t.value().template cast<U>()); };
    out.token_embedding = conv(token_embedding);
    out.position_embedding = conv(position_embedding);
    if (config.column_slots) out.column_embedding = conv(column_embedding);
    for (const auto& l : layers) {
        out.layers.push_back({conv(l.ln1_gain), conv(l.ln1_bias), conv(l.wq), conv(l.wk), conv(l.wv), conv(l.wo), conv(l.ln2_gain),
                              conv(l.ln2_bias), conv(l.ffn_in), conv(l.ffn_in_bias), conv(l.ffn_out), conv(l.ffn_out_bias)});
    }
    out.final_gain = conv(final_gain);
    out.final_bias = conv(final_bias);
    out.link_weight = conv(link_weight);
    out.link_bias = conv(link_bias);
    return out;
}

extern template struct ModelParams<float>;
extern template struct ModelParams<double>;

}  // namespace jolt
