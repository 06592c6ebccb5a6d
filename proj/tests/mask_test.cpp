#include <gtest/gtest.h>

#include "fixtures/mask_oracle.hpp"
#include "jolt/error.hpp"
#include "jolt/mask.hpp"

using namespace jolt;

namespace {

SegmentMap layout(const std::string& tags) {
    SegmentMap seg;
    for (char c : tags) {
        seg.segment.push_back(c == 'P' ? Segment::Prefix : c == 'Q' ? Segment::Query : Segment::Schema);
        seg.marker.push_back(c == 'M' || c == 'K');
        seg.gt_schema.push_back(c == 'G' || c == 'K');
        seg.noisy_schema.push_back(c == 'N');
    }
    return seg;
}

std::string grid(const AttentionMask& m) {
    std::string out;
    for (std::size_t i = 0; i < m.size(); ++i) {
        for (std::size_t j = 0; j < m.size(); ++j) out += m(i, j) ? '#' : '.';
        out += '\n';
    }
    return out;
}

}  // namespace

TEST(JointMask, ThreeTokenToy) {
    const auto m = build_joint_mask(layout("PMQ"));
    EXPECT_EQ(grid(m), "#..\n##.\n#.#\n");
}

TEST(JointMask, HandDrawnLayout) {
    // K marks a marker token that also sits inside a GT column definition.
    const auto m = build_joint_mask(layout("PPSMGKQQ"));
    EXPECT_EQ(grid(m),
              "#.......\n"
              "##......\n"
              "###.#...\n"
              "######..\n"
              "###.#...\n"
              "######..\n"
              "##..#.#.\n"
              "##..#.##\n");
}

TEST(JointMask, AgreesWithSetOracle) {
    CounterRng rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        const auto seg = fixtures::random_segmentation(rng);
        const auto m = build_joint_mask(seg);
        const auto rows = fixtures::oracle_rows(seg);
        for (std::size_t i = 0; i < seg.size(); ++i) {
            for (std::size_t j = 0; j < seg.size(); ++j) {
                ASSERT_EQ(m(i, j), rows[i].count(j) > 0) << "trial " << trial << " (" << i << "," << j << ")";
            }
        }
    }
}

TEST(JointMask, MarkerRules) {
    CounterRng rng(7);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto seg = fixtures::random_segmentation(rng, 40);
        const auto m = build_joint_mask(seg);
        for (std::size_t j = 0; j < seg.size(); ++j) {
            if (!seg.marker[j]) continue;
            for (std::size_t i = 0; i < seg.size(); ++i) {
                if (seg.marker[i]) {
                    ASSERT_TRUE(m(i, j));
                } else {
                    ASSERT_FALSE(m(i, j));
                }
            }
            for (std::size_t k = 0; k < seg.size(); ++k) {
                ASSERT_EQ(m(j, k), seg.segment[k] != Segment::Query);
            }
        }
    }
}

TEST(JointMask, EmptyNoisySetMatchesGtOnly) {
    auto seg = layout("PPSGSMQQQ");
    const auto m = build_joint_mask(seg);
    for (std::size_t i = 6; i < 9; ++i) {
        EXPECT_FALSE(m(i, 2));
        EXPECT_TRUE(m(i, 3));
        EXPECT_FALSE(m(i, 4));
        EXPECT_FALSE(m(i, 5));
    }
    seg.noisy_schema[4] = 1;
    const auto with_noise = build_joint_mask(seg);
    for (std::size_t i = 6; i < 9; ++i) EXPECT_TRUE(with_noise(i, 4));
}

TEST(JointMask, NoQueryRowAttendsToMarker) {
    const auto m = build_joint_mask(layout("PMKMQQ"));
    for (std::size_t i = 4; i < 6; ++i) {
        for (std::size_t j = 1; j < 4; ++j) EXPECT_FALSE(m(i, j));
    }
}

TEST(JointMask, RejectsBadSegmentation) {
    auto bad = layout("PSQ");
    bad.gt_schema.pop_back();
    EXPECT_THROW(build_joint_mask(bad), Error);
    auto stray = layout("PSQ");
    stray.marker[2] = 1;
    try {
        build_joint_mask(stray);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidSegmentation);
    }
    EXPECT_THROW(build_joint_mask(SegmentMap{}), Error);
}

TEST(CausalMask, LowerTriangular) {
    EXPECT_EQ(grid(build_causal_mask(1)), "#\n");
    const auto m = build_causal_mask(5);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(m.row_count(i), i + 1);
    EXPECT_THROW(build_causal_mask(0), Error);
}

TEST(Render, AsciiAndImages) {
    AttentionMask m(2);
    m.set(0, 0);
    m.set(1, 0);
    m.set(1, 1);
    EXPECT_EQ(render_mask_ascii(m), "#.\n##\n");
    const auto seg = layout("PM");
    const std::vector<std::string> labels = {"a", "<m>"};
    EXPECT_EQ(render_mask_ascii(m, &seg, &labels), "     PM\na   P #.\n<m> M ##\n");
    EXPECT_EQ(render_mask_ppm(m, 1), "P3\n2 2\n255\n0 0 0 255 255 255\n0 0 0 0 0 0\n");
    const auto svg = render_mask_svg(m, &labels);
    EXPECT_NE(svg.find("&lt;m&gt;"), std::string::npos);
    std::size_t black = 0;
    for (auto p = svg.find("fill=\"black\""); p != std::string::npos; p = svg.find("fill=\"black\"", p + 1)) ++black;
    EXPECT_EQ(black, 3u);
}
