#include <gtest/gtest.h>

#include <cmath>

#include "fixtures/gradcheck.hpp"
#include "fixtures/gradcheck_cases.hpp"
#include "fixtures/mask_oracle.hpp"
#include "jolt/autodiff.hpp"

using namespace jolt;
using namespace jolt::ad;
using fixtures::MatD;
using fixtures::TensorD;
using fixtures::random_mat;

namespace {

constexpr double kTol = 1e-4;

using fixtures::random_mask;

}  // namespace

TEST(Ops, IdentityMatmul) {
    MatD a(2, 2);
    a << 1, 2, 3, 4;
    const auto out = matmul(TensorD::constant(a), TensorD::constant(MatD::Identity(2, 2)));
    EXPECT_EQ(out.value(), a);
}

TEST(Ops, TransposeOfProduct) {
    CounterRng rng(1);
    const auto a = TensorD::constant(random_mat(rng, 3, 4));
    const auto b = TensorD::constant(random_mat(rng, 4, 2));
    const MatD lhs = transpose(matmul(a, b)).value();
    const MatD rhs = matmul(transpose(b), transpose(a)).value();
    EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Ops, RowBiasBroadcast) {
    CounterRng rng(2);
    const MatD a = random_mat(rng, 3, 4), b = random_mat(rng, 1, 4);
    const MatD out = add_row(TensorD::constant(a), TensorD::constant(b)).value();
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(out(i, j), a(i, j) + b(0, j));
    }
}

TEST(Ops, ShapeMismatch) {
    const auto a = TensorD::constant(MatD::Zero(2, 3));
    try {
        matmul(a, a);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
    }
    EXPECT_THROW(add(a, TensorD::constant(MatD::Zero(3, 2))), Error);
    EXPECT_THROW(slice(a, 1, 2, 4), Error);
}

TEST(MaskedSoftmax, Examples) {
    AttentionMask all(3);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) all.set(i, j);
    }
    const auto uni = masked_softmax(TensorD::constant(MatD::Constant(3, 3, 0.7)), all);
    EXPECT_NEAR(uni.value()(1, 2), 1.0 / 3, 1e-15);

    AttentionMask single(2);
    single.set(0, 1);
    single.set(1, 0);
    const auto one = masked_softmax(TensorD::constant(MatD::Constant(2, 2, 5.0)), single);
    EXPECT_EQ(one.value()(0, 1), 1.0);
    EXPECT_EQ(one.value()(0, 0), 0.0);

    AttentionMask empty(2);
    empty.set(0, 0);
    try {
        masked_softmax(TensorD::constant(MatD::Zero(2, 2)), empty);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyRow);
    }
}

TEST(MaskedSoftmax, MatchesDirectNormalization) {
    CounterRng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const auto mask = random_mask(rng, 4);
        const MatD s = random_mat(rng, 4, 4, 3.0);
        const MatD p = masked_softmax(TensorD::constant(s), mask).value();
        for (std::size_t i = 0; i < 4; ++i) {
            double z = 0;
            for (std::size_t j = 0; j < 4; ++j) z += mask(i, j) ? std::exp(s(i, j)) : 0.0;
            double row = 0;
            for (std::size_t j = 0; j < 4; ++j) {
                if (mask(i, j)) {
                    EXPECT_NEAR(p(i, j), std::exp(s(i, j)) / z, 1e-12);
                } else {
                    EXPECT_EQ(p(i, j), 0.0);
                }
                row += p(i, j);
            }
            EXPECT_NEAR(row, 1.0, 1e-6);
        }
    }
}

TEST(MaskedSoftmax, FloatRowsStochastic) {
    CounterRng rng(4);
    const auto mask = random_mask(rng, 32);
    ad::Mat<float> s(32, 32);
    for (Eigen::Index k = 0; k < s.size(); ++k) s.data()[k] = static_cast<float>(rng.normal() * 10);
    const auto p = masked_softmax(ad::Tensor<float>::constant(s), mask).value();
    for (Eigen::Index i = 0; i < 32; ++i) {
        EXPECT_NEAR(p.row(i).sum(), 1.0f, 1e-6f);
        for (Eigen::Index j = 0; j < 32; ++j) {
            if (!mask(static_cast<std::size_t>(i), static_cast<std::size_t>(j))) EXPECT_EQ(p(i, j), 0.0f);
        }
    }
}

TEST(LayerNorm, Examples) {
    const auto gain = TensorD::constant(MatD::Ones(1, 4)), bias = TensorD::constant(MatD::Zero(1, 4));
    const auto flat = layer_norm(TensorD::constant(MatD::Constant(2, 4, 3.0)), gain, bias);
    EXPECT_EQ(flat.value().cwiseAbs().maxCoeff(), 0.0);

    CounterRng rng(5);
    const MatD x = random_mat(rng, 3, 4);
    const MatD once = layer_norm(TensorD::constant(x), gain, bias, 0.0).value();
    const MatD twice = layer_norm(TensorD::constant(once), gain, bias, 0.0).value();
    EXPECT_LT((once - twice).cwiseAbs().maxCoeff(), 1e-12);
    for (Eigen::Index i = 0; i < 3; ++i) {
        EXPECT_NEAR(once.row(i).mean(), 0.0, 1e-12);
        EXPECT_NEAR(once.row(i).squaredNorm() / 4, 1.0, 1e-12);
    }
}

TEST(Losses, BceExamples) {
    EXPECT_NEAR(bce_loss(TensorD::scalar(0.5), {1}).item(), std::log(2.0), 1e-12);
    EXPECT_NEAR(bce_loss(TensorD::scalar(1 - 1e-7), {1}).item(), 1e-7, 1e-12);
    EXPECT_NEAR(bce_loss(TensorD::scalar(1.0), {1}).item(), -std::log(1 - 1e-7), 1e-15);
    MatD p(3, 1);
    p << 0.2, 0.9, 0.6;
    const double oracle = -(std::log(0.8) + std::log(0.9) + std::log(0.6)) / 3;
    EXPECT_NEAR(bce_loss(TensorD::constant(p), {0, 1, 1}).item(), oracle, 1e-12);
}

TEST(Losses, CrossEntropyExamples) {
    EXPECT_NEAR(cross_entropy(TensorD::constant(MatD::Zero(1, 10)), std::vector<int>{3}).item(), std::log(10.0), 1e-12);
    MatD peaked = MatD::Zero(1, 10);
    peaked(0, 7) = 50;
    EXPECT_LT(cross_entropy(TensorD::constant(peaked), std::vector<int>{7}).item(), 1e-15);
    CounterRng rng(6);
    const MatD l = random_mat(rng, 3, 5);
    const std::vector<int> t = {0, 4, 2};
    double oracle = 0;
    for (int k = 0; k < 3; ++k) oracle -= l(k, t[k]) - std::log(l.row(k).array().exp().sum());
    EXPECT_NEAR(cross_entropy(TensorD::constant(l), t).item(), oracle / 3, 1e-12);
}

TEST(Backward, SquareAtThree) {
    auto x = TensorD::parameter(MatD::Constant(1, 1, 3.0));
    backward(mul(x, x));
    EXPECT_DOUBLE_EQ(x.grad()(0, 0), 6.0);
}

TEST(Backward, DisconnectedStaysZero) {
    auto x = TensorD::parameter(MatD::Constant(1, 1, 3.0));
    auto y = TensorD::parameter(MatD::Constant(2, 2, 1.0));
    backward(scale(x, 2.0));
    EXPECT_EQ(y.grad(), MatD::Zero(2, 2));
    EXPECT_DOUBLE_EQ(x.grad()(0, 0), 2.0);
}

TEST(Backward, NoGradGuardRecordsNothing) {
    auto x = TensorD::parameter(MatD::Constant(1, 1, 3.0));
    NoGradGuard guard;
    const auto y = mul(x, x);
    EXPECT_FALSE(y.requires_grad());
}

TEST(AdamW, SingleStepMatchesClosedForm) {
    auto p = TensorD::parameter(MatD::Constant(1, 1, 2.0));
    p.mutable_grad()(0, 0) = 0.5;
    std::vector<TensorD> params{p};
    AdamWState<double> st;
    AdamWConfig cfg{0.1, 0.9, 0.999, 1e-8, 0.01};
    adamw_step(params, st, cfg);
    // m = 0.05, v = 0.00025; bias-corrected m_hat = 0.5, v_hat = 0.25.
    const double expected = 2.0 * (1 - 0.1 * 0.01) - 0.1 * 0.5 / (std::sqrt(0.25) + 1e-8);
    EXPECT_NEAR(p.value()(0, 0), expected, 1e-15);
    // Second step with the same gradient: m = 0.095, v = 0.00049975.
    adamw_step(params, st, cfg);
    const double m_hat = 0.095 / (1 - 0.81), v_hat = 0.00049975 / (1 - 0.998001);
    const double expected2 = expected * (1 - 0.001) - 0.1 * m_hat / (std::sqrt(v_hat) + 1e-8);
    EXPECT_NEAR(p.value()(0, 0), expected2, 1e-12);
}

TEST(AdamW, ClipGradNorm) {
    auto a = TensorD::parameter(MatD::Zero(1, 2));
    a.mutable_grad() << 3, 4;
    std::vector<TensorD> params{a};
    EXPECT_DOUBLE_EQ(clip_grad_norm(params, 1.0), 5.0);
    EXPECT_NEAR(a.grad().norm(), 1.0, 1e-6);
}

class GradCheck : public ::testing::TestWithParam<int> {};

TEST_P(GradCheck, EveryOpAgainstCentralDifferences) {
    auto cases = fixtures::op_gradcheck_cases(100 + static_cast<std::uint64_t>(GetParam()));
    for (auto& c : cases) {
        const double err = fixtures::max_relative_error(c.fn, c.in);
        EXPECT_LT(err, kTol) << c.name;
    }
}

INSTANTIATE_TEST_SUITE_P(TenInstances, GradCheck, ::testing::Range(0, 10));
