#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "canekit/tensor.hpp"
#include "support/oracles.hpp"

using namespace canekit;

namespace {

Tensor filled(Shape s, float v) { return Tensor(s, std::vector<float>(s.numel(), v)); }

ConvSpec spec(std::size_t in, std::size_t out, std::size_t k, std::size_t stride, std::size_t pad, std::size_t groups) {
    ConvSpec s;
    s.in_channels = in;
    s.out_channels = out;
    s.kernel = {k, k};
    s.stride = {stride, stride};
    s.padding = {pad, pad};
    s.groups = groups;
    return s;
}

}  // namespace

TEST(Conv2d, OnesKernelSumsWindow) {
    const Tensor out = conv2d(filled({1, 1, 3, 3}, 1.0f), filled({1, 1, 2, 2}, 1.0f), spec(1, 1, 2, 1, 0, 1));
    ASSERT_EQ(out.shape(), (Shape{1, 1, 2, 2}));
    for (float v : out.data()) EXPECT_EQ(v, 4.0f);
}

TEST(Conv2d, DepthwiseScalesEachChannel) {
    const Tensor w({2, 1, 1, 1}, {2.0f, 3.0f});
    const Tensor out = conv2d(filled({1, 2, 2, 2}, 1.0f), w, spec(2, 2, 1, 1, 0, 2));
    for (float v : out.plane(0, 0)) EXPECT_EQ(v, 2.0f);
    for (float v : out.plane(0, 1)) EXPECT_EQ(v, 3.0f);
}

TEST(Conv2d, GroupedStridedMatchesNaiveLoops) {
    Rng rng(11);
    const ConvSpec s = spec(4, 8, 3, 2, 1, 2);
    const Tensor x = oracle::random_tensor({1, 4, 8, 8}, rng);
    const Tensor w = oracle::random_tensor(s.weight_shape(), rng);
    EXPECT_LE(oracle::rel_error(conv2d(x, w, s), oracle::conv2d(x, w, s)), 1e-5);
}

TEST(Conv2d, RandomShapesMatchNaiveLoops) {
    Rng rng(12);
    for (int trial = 0; trial < 120; ++trial) {
        const std::size_t groups = 1 + rng.below(3);
        const std::size_t in = groups * (1 + rng.below(3));
        const std::size_t out = groups * (1 + rng.below(3));
        const std::size_t k = 1 + rng.below(3);
        const std::size_t stride = 1 + rng.below(2);
        const std::size_t pad = rng.below(k);
        const std::size_t h = k + rng.below(7), w = k + rng.below(7);
        const ConvSpec s = spec(in, out, k, stride, pad, groups);
        const Tensor x = oracle::random_tensor({1 + rng.below(2), in, h, w}, rng);
        const Tensor wt = oracle::random_tensor(s.weight_shape(), rng);
        ASSERT_LE(oracle::rel_error(conv2d(x, wt, s), oracle::conv2d(x, wt, s)), 1e-5) << "trial " << trial;
    }
}

TEST(Conv2d, GroupedEqualsSlicedConvolutions) {
    Rng rng(13);
    const std::size_t g = 3;
    const ConvSpec s = spec(6, 9, 3, 1, 1, g);
    const Tensor x = oracle::random_tensor({1, 6, 7, 7}, rng);
    const Tensor w = oracle::random_tensor(s.weight_shape(), rng);
    const Tensor whole = conv2d(x, w, s);
    for (std::size_t i = 0; i < g; ++i) {
        const Tensor xs = slice_channels(x, 2 * i, 2);
        std::vector<float> wpart(w.data().begin() + static_cast<std::ptrdiff_t>(3 * i * 2 * 9),
                                 w.data().begin() + static_cast<std::ptrdiff_t>(3 * (i + 1) * 2 * 9));
        const Tensor part = conv2d(xs, Tensor({3, 2, 3, 3}, std::move(wpart)), spec(2, 3, 3, 1, 1, 1));
        EXPECT_LE(oracle::rel_error(part, slice_channels(whole, 3 * i, 3)), 1e-6);
    }
}

TEST(Conv2d, ShapeErrorsNameTheAxis) {
    const ConvSpec s = spec(4, 4, 3, 1, 1, 1);
    try {
        conv2d(filled({1, 3, 5, 5}, 0), filled(s.weight_shape(), 0), s);
        FAIL() << "expected DimensionError";
    } catch (const DimensionError& e) {
        EXPECT_EQ(e.axis(), "channels");
    }
    EXPECT_THROW(conv2d(filled({1, 4, 5, 5}, 0), filled({4, 4, 1, 1}, 0), s), DimensionError);
}

TEST(Conv2d, NonDividingGroupsIsConfigError) {
    const ConvSpec s = spec(4, 6, 1, 1, 0, 4);
    EXPECT_THROW(conv2d(filled({1, 4, 2, 2}, 0), filled({6, 1, 1, 1}, 0), s), ConfigError);
}

TEST(BatchNorm, ScalarFormula) {
    const float mean = 0, var = 1, gamma = 2, beta = 3;
    const Tensor out = batchnorm_infer(filled({1, 1, 1, 1}, 1.0f), {{&mean, 1}, {&var, 1}, {&gamma, 1}, {&beta, 1}, 0.0f});
    EXPECT_EQ(out.data()[0], 5.0f);
}

TEST(BatchNorm, BatchStatisticsCentreTheChannel) {
    Rng rng(21);
    const Tensor x = oracle::random_tensor({1, 1, 6, 6}, rng, -3, 5);
    double mean = 0, var = 0;
    for (float v : x.data()) mean += v;
    mean /= 36;
    for (float v : x.data()) var += (v - mean) * (v - mean);
    var /= 36;
    const float m = static_cast<float>(mean), vv = static_cast<float>(var), one = 1, zero = 0;
    const Tensor y = batchnorm_infer(x, {{&m, 1}, {&vv, 1}, {&one, 1}, {&zero, 1}, 1e-5f});
    double out_mean = 0;
    for (float v : y.data()) out_mean += v;
    EXPECT_NEAR(out_mean / 36, 0.0, 1e-5);
}

TEST(BatchNorm, MatchesScalarOracle) {
    Rng rng(22);
    const Tensor x = oracle::random_tensor({2, 3, 4, 4}, rng);
    std::vector<float> mean(3), var(3), gamma(3), beta(3);
    for (std::size_t c = 0; c < 3; ++c) {
        mean[c] = static_cast<float>(rng.uniform(-1, 1));
        var[c] = static_cast<float>(rng.uniform(0.1, 2));
        gamma[c] = static_cast<float>(rng.uniform(-2, 2));
        beta[c] = static_cast<float>(rng.uniform(-1, 1));
    }
    const Tensor y = batchnorm_infer(x, {mean, var, gamma, beta, 1e-5f});
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t i = 0; i < 16; ++i) {
                const double expect = gamma[c] * (x.plane(n, c)[i] - mean[c]) / std::sqrt(var[c] + 1e-5) + beta[c];
                EXPECT_NEAR(y.plane(n, c)[i], expect, 1e-6);
            }
}

TEST(BatchNorm, LengthMismatchIsDimensionError) {
    const std::vector<float> two(2, 1.0f);
    EXPECT_THROW(batchnorm_infer(filled({1, 3, 1, 1}, 0), {two, two, two, two, 1e-5f}), DimensionError);
}

TEST(Relu, Basics) {
    const Tensor y = relu(Tensor({1, 3, 1, 1}, {-1, 0, 2}));
    EXPECT_EQ(std::vector<float>(y.data().begin(), y.data().end()), (std::vector<float>{0, 0, 2}));
    const Tensor neg = relu(filled({1, 2, 2, 2}, -3));
    for (float v : neg.data()) EXPECT_EQ(v, 0.0f);
    Rng rng(5);
    const Tensor x = oracle::random_tensor({1, 2, 3, 3}, rng);
    const Tensor once = relu(x), twice = relu(once);
    EXPECT_TRUE(std::ranges::equal(once.data(), twice.data()));
}

TEST(MaxPool, ConstantStaysConstant) {
    const Tensor y = maxpool2d(filled({1, 2, 5, 5}, 7.0f));
    for (float v : y.data()) EXPECT_EQ(v, 7.0f);
}

TEST(MaxPool, PeakAppearsInCoveringWindows) {
    Tensor x = filled({1, 1, 4, 4}, 0.0f);
    x.at(0, 0, 0, 0) = 9.0f;
    const Tensor y = maxpool2d(x);
    ASSERT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
    EXPECT_EQ(y.at(0, 0, 0, 0), 9.0f);
    EXPECT_EQ(y.at(0, 0, 0, 1), 0.0f);
    EXPECT_EQ(y.at(0, 0, 1, 0), 0.0f);
}

TEST(MaxPool, NegativeInputIgnoresPadding) {
    const Tensor y = maxpool2d(filled({1, 1, 3, 3}, -2.0f));
    for (float v : y.data()) EXPECT_EQ(v, -2.0f);
}

TEST(MaxPool, MatchesWindowOracleExactly) {
    Rng rng(31);
    const Tensor x = oracle::random_tensor({1, 1, 7, 7}, rng);
    const Tensor y = maxpool2d(x);
    const Tensor ref = oracle::maxpool(x, 3, 2, 1);
    ASSERT_EQ(y.shape(), ref.shape());
    for (std::size_t i = 0; i < y.numel(); ++i) EXPECT_EQ(y.data()[i], ref.data()[i]);
}

TEST(ChannelShuffle, TaggedPermutation) {
    Tensor x({1, 6, 1, 1}, {0, 1, 2, 3, 4, 5});
    const Tensor y = channel_shuffle(x, 2);
    EXPECT_EQ(std::vector<float>(y.data().begin(), y.data().end()), (std::vector<float>{0, 3, 1, 4, 2, 5}));
}

TEST(ChannelShuffle, TrivialGroupsAreIdentity) {
    Rng rng(41);
    const Tensor x = oracle::random_tensor({1, 6, 2, 2}, rng);
    for (std::size_t g : {1u, 6u}) {
        const Tensor y = channel_shuffle(x, g);
        EXPECT_TRUE(std::equal(y.data().begin(), y.data().end(), x.data().begin()));
    }
}

TEST(ChannelShuffle, ComplementaryGroupsInvert) {
    Rng rng(42);
    for (std::size_t c = 1; c <= 64; ++c) {
        const Tensor x = oracle::random_tensor({1, c, 2, 1}, rng);
        for (std::size_t g = 1; g <= c; ++g) {
            if (c % g) continue;
            const Tensor back = channel_shuffle(channel_shuffle(x, g), c / g);
            ASSERT_TRUE(std::equal(back.data().begin(), back.data().end(), x.data().begin())) << c << "/" << g;
        }
    }
}

TEST(ChannelShuffle, NonDividingIsConfigError) {
    EXPECT_THROW(channel_shuffle(filled({1, 6, 1, 1}, 0), 4), ConfigError);
}

TEST(GlobalAvgPool, Basics) {
    EXPECT_EQ(global_avg_pool(Tensor({1, 1, 2, 2}, {1, 3, 5, 7})).data()[0], 4.0f);
    EXPECT_EQ(global_avg_pool(filled({1, 1, 3, 3}, 2.5f)).data()[0], 2.5f);
    Rng rng(51);
    const Tensor x = oracle::random_tensor({2, 5, 7, 3}, rng);
    EXPECT_LE(oracle::rel_error(global_avg_pool(x), oracle::gap(x)), 1e-6);
}

TEST(Linear, IdentityAndBias) {
    Rng rng(61);
    const Tensor x = oracle::random_tensor({1, 3, 1, 1}, rng);
    Tensor eye({3, 3, 1, 1});
    for (std::size_t i = 0; i < 3; ++i) eye.data()[i * 3 + i] = 1.0f;
    const std::vector<float> zero(3, 0.0f);
    const Tensor y = linear(x, eye, zero);
    EXPECT_TRUE(std::equal(y.data().begin(), y.data().end(), x.data().begin()));

    const std::vector<float> b{1, 2};
    const Tensor z = linear(x, filled({2, 3, 1, 1}, 0), b);
    EXPECT_EQ(z.data()[0], 1.0f);
    EXPECT_EQ(z.data()[1], 2.0f);
}

TEST(Linear, MatchesDotProductOracle) {
    Rng rng(62);
    const Tensor x = oracle::random_tensor({3, 40, 1, 1}, rng);
    const Tensor w = oracle::random_tensor({7, 40, 1, 1}, rng);
    std::vector<float> b(7);
    for (float& v : b) v = static_cast<float>(rng.uniform(-1, 1));
    EXPECT_LE(oracle::rel_error(linear(x, w, b), oracle::linear(x, w, b)), 1e-5);
}

TEST(Linear, FeatureMismatchIsDimensionError) {
    const std::vector<float> b(2, 0.0f);
    EXPECT_THROW(linear(filled({1, 3, 1, 1}, 0), filled({2, 4, 1, 1}, 0), b), DimensionError);
}

TEST(Softmax, Basics) {
    const std::vector<float> equal(17, 0.3f);
    for (double p : softmax(equal)) EXPECT_NEAR(p, 1.0 / 17.0, 1e-12);
    const std::vector<float> two{0, 0};
    EXPECT_EQ(softmax(two)[0], 0.5);

    Rng rng(71);
    std::vector<float> z(17), shifted(17);
    for (std::size_t i = 0; i < z.size(); ++i) {
        z[i] = static_cast<float>(rng.uniform(-5, 5));
        shifted[i] = z[i] + 100.0f;
    }
    const auto p = softmax(z), q = softmax(shifted);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-6);
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], q[i], 1e-6);
}

TEST(Softmax, LargeLogitsStayFinite) {
    const std::vector<float> z{1000.0f, 999.0f, -1000.0f};
    for (double p : softmax(z)) EXPECT_TRUE(std::isfinite(p));
}

TEST(BilinearResize, IdentityAndConstant) {
    Rng rng(81);
    const Tensor x = oracle::random_tensor({1, 2, 5, 6}, rng);
    EXPECT_LE(oracle::rel_error(bilinear_resize(x, 5, 6), x), 1e-6);
    const Tensor y = bilinear_resize(filled({1, 1, 3, 4}, 0.7f), 9, 2);
    for (float v : y.data()) EXPECT_NEAR(v, 0.7f, 1e-6);
}

TEST(BilinearResize, CheckerUpsampleHandGrid) {
    // Half-pixel centres: output x maps to (x + 0.5) / 2 - 0.5 in the
    // source, giving taps at -0.25, 0.25, 0.75, 1.25 (clamped to [0, 1]).
    const Tensor x({1, 1, 2, 2}, {0, 1, 1, 0});
    const std::vector<float> expect{0,    0.25f, 0.75f, 1,     0.25f, 0.375f, 0.625f, 0.75f,
                                    0.75f, 0.625f, 0.375f, 0.25f, 1,     0.75f,  0.25f,  0};
    const Tensor y = bilinear_resize(x, 4, 4);
    for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(y.data()[i], expect[i], 1e-6) << i;
}

TEST(BilinearResize, ZeroTargetIsConfigError) {
    EXPECT_THROW(bilinear_resize(filled({1, 1, 2, 2}, 0), 0, 3), ConfigError);
}

TEST(Tensor, SizeMismatchRejected) {
    EXPECT_THROW(Tensor({1, 1, 2, 2}, std::vector<float>(3)), DimensionError);
}

TEST(Tensor, FiniteInFiniteOut) {
    Rng rng(91);
    const Tensor x = oracle::random_tensor({1, 4, 9, 9}, rng, -50, 50);
    const ConvSpec s = spec(4, 4, 3, 2, 1, 4);
    const Tensor w = oracle::random_tensor(s.weight_shape(), rng);
    EXPECT_TRUE(conv2d(x, w, s).all_finite());
    EXPECT_TRUE(maxpool2d(x).all_finite());
    EXPECT_TRUE(bilinear_resize(x, 13, 3).all_finite());
    EXPECT_TRUE(channel_shuffle(x, 2).all_finite());
}
