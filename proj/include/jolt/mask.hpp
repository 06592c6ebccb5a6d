#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "jolt/tokenizer.hpp"

namespace jolt {

/// Dense n x n visibility matrix; row i lists what token i may attend to.
class AttentionMask {
public:
    AttentionMask() = default;
    explicit AttentionMask(std::size_t n) : n_(n), visible_(n * n, 0) {}

    std::size_t size() const noexcept { return n_; }
    bool operator()(std::size_t i, std::size_t j) const noexcept { return visible_[i * n_ + j] != 0; }
    void set(std::size_t i, std::size_t j, bool v = true) noexcept { visible_[i * n_ + j] = v ? 1 : 0; }
    std::size_t row_count(std::size_t i) const noexcept;
    const std::uint8_t* row(std::size_t i) const noexcept { return visible_.data() + i * n_; }

    bool operator==(const AttentionMask&) const = default;

private:
    std::size_t n_ = 0;
    std::vector<std::uint8_t> visible_;
};

/// Joint training mask:
///   prefix rows      causal over the prefix;
///   schema rows      every prefix and schema token except markers;
///   marker rows      every prefix and schema token, markers included;
///   query rows       prefix, GT schema, noisy schema and earlier query tokens, never markers.
/// Throws InvalidSegmentation when the per-token vectors disagree in length or
/// a marker / GT / noisy flag lies outside the schema.
AttentionMask build_joint_mask(const SegmentMap& seg);

/// Lower-triangular mask. n must be >= 1.
AttentionMask build_causal_mask(std::size_t n);

/// ASCII grid: '#' visible, '.' hidden; header rows tag each position
/// (P prefix, S schema, M marker, G GT schema, N noisy schema, Q query).
std::string render_mask_ascii(const AttentionMask& mask, const SegmentMap* seg = nullptr,
                              const std::vector<std::string>* labels = nullptr);

/// Plain PPM (P3) with `cell` pixels per entry: black visible, white hidden.
std::string render_mask_ppm(const AttentionMask& mask, std::size_t cell = 4);

/// SVG grid with optional axis labels.
std::string render_mask_svg(const AttentionMask& mask, const std::vector<std::string>* labels = nullptr, std::size_t cell = 14);

}  // namespace jolt
