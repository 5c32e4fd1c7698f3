#include <cmath>

#include <gtest/gtest.h>

#include "macres/evaluator.hpp"
#include "macres/hashing.hpp"

using namespace macres;
using namespace macres::hashing;

namespace {

Bits random_bits(Rng& rng, std::size_t n) {
    Bits b(n);
    for (auto& x : b) x = rng.bit();
    return b;
}

}  // namespace

TEST(Toeplitz, ZeroOutputAndZeroInput) {
    Rng rng(1);
    const auto h0 = sample_hash(rng, 10, 0);
    EXPECT_TRUE(h0.apply(random_bits(rng, 10)).empty());
    const auto h = sample_hash(rng, 12, 5);
    EXPECT_EQ(h.apply(Bits(12, 0)), Bits(5, 0));
}

TEST(Toeplitz, IdentityDiagonal) {
    // a single 1 at offset in_len-1 gives entry(i,j) = [i == j]
    const std::size_t n = 6;
    Bits diag(2 * n - 1, 0);
    diag[n - 1] = 1;
    const ToeplitzHash h(n, n, diag);
    Rng rng(2);
    for (int rep = 0; rep < 20; ++rep) {
        const Bits x = random_bits(rng, n);
        EXPECT_EQ(h.apply(x), x);
    }
}

TEST(Toeplitz, ConstantDiagonals) {
    Rng rng(8);
    const auto h = sample_hash(rng, 9, 4);
    for (std::size_t i = 1; i < 4; ++i)
        for (std::size_t j = 1; j < 9; ++j) EXPECT_EQ(h.entry(i, j), h.entry(i - 1, j - 1));
}

TEST(Toeplitz, LinearityProperty) {
    Rng rng(3);
    const auto h = sample_hash(rng, 64, 17);
    for (int rep = 0; rep < 200; ++rep) {
        const Bits a = random_bits(rng, 64), b = random_bits(rng, 64);
        Bits s(64);
        for (std::size_t i = 0; i < 64; ++i) s[i] = a[i] ^ b[i];
        const Bits ha = h.apply(a), hb = h.apply(b), hs = h.apply(s);
        for (std::size_t i = 0; i < 17; ++i) EXPECT_EQ(hs[i], ha[i] ^ hb[i]);
    }
}

TEST(Toeplitz, PackedMatchesUnpacked) {
    Rng rng(4);
    const auto h = sample_hash(rng, 20, 7);
    for (int rep = 0; rep < 200; ++rep) {
        const Bits x = random_bits(rng, 20);
        EXPECT_EQ(h.apply_packed(polar::pack(x)), polar::pack(h.apply(x)));
    }
}

TEST(Toeplitz, DeterministicFromSeed) {
    Rng a(77), b(77);
    EXPECT_EQ(sample_hash(a, 16, 5), sample_hash(b, 16, 5));
}

TEST(Toeplitz, HexRoundTrip) {
    Rng rng(5);
    for (std::size_t out : {0u, 1u, 3u, 8u}) {
        const auto h = sample_hash(rng, 13, out);
        EXPECT_EQ(ToeplitzHash::from_hex(h.to_hex(), 13, out), h);
    }
    EXPECT_THROW(ToeplitzHash::from_hex("zz", 4, 2), std::invalid_argument);
    EXPECT_THROW(ToeplitzHash::from_hex("f", 2, 2), std::invalid_argument);  // 3 bits, padding bit set
    EXPECT_THROW(ToeplitzHash(4, 5, Bits(8, 0)), std::invalid_argument);
}

TEST(Toeplitz, TwoUniversalExactSmall) {
    // average over every diagonal: collision probability for each distinct pair
    const std::size_t n = 5, r = 2;
    const std::size_t dbits = n + r - 1;
    for (std::uint64_t x = 0; x < 32; ++x)
        for (std::uint64_t y = x + 1; y < 32; ++y) {
            std::size_t coll = 0;
            for (std::uint64_t d = 0; d < (1u << dbits); ++d) {
                const ToeplitzHash h(n, r, polar::unpack(d, dbits));
                coll += h.apply_packed(x) == h.apply_packed(y);
            }
            EXPECT_LE(static_cast<double>(coll) / static_cast<double>(1u << dbits), std::exp2(-static_cast<double>(r)) + 1e-15);
        }
}

TEST(Toeplitz, CollisionRateMonteCarlo) {
    Rng rng(6);
    const std::size_t trials = 100000;
    std::size_t coll = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        const auto h = sample_hash(rng, 32, 8);
        Bits x = random_bits(rng, 32), y = random_bits(rng, 32);
        if (x == y) y[0] ^= 1u;
        coll += h.apply(x) == h.apply(y);
    }
    const double p = 1.0 / 256.0;
    const double sigma = std::sqrt(p * (1 - p) / static_cast<double>(trials));
    EXPECT_LE(static_cast<double>(coll) / static_cast<double>(trials), p + 3 * sigma);
}

TEST(HashedJoint, ConstantHashKeepsZMarginal) {
    Rng rng(7);
    std::vector<double> p(16 * 3);
    for (auto& v : p) v = rng.uniform01();
    const JointDist j({16, 3}, p, true);
    const std::vector<ToeplitzHash> hs{sample_hash(rng, 4, 0)};
    const auto out = hashed_joint_dist_exact(hs, j);
    ASSERT_EQ(out.shape(), (std::vector<std::size_t>{1, 3}));
    const auto z = j.marginal({1});
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(out.pmf()[i], z.pmf()[i], 1e-15);
}

TEST(HashedJoint, IdentityHashRelabels) {
    Rng rng(9);
    std::vector<double> p(8 * 2);
    for (auto& v : p) v = rng.uniform01();
    const JointDist j({8, 2}, p, true);
    Bits diag(5, 0);
    diag[2] = 1;
    const std::vector<ToeplitzHash> hs{ToeplitzHash(3, 3, diag)};
    const auto out = hashed_joint_dist_exact(hs, j);
    for (std::size_t i = 0; i < j.size(); ++i) EXPECT_NEAR(out.pmf()[i], j.pmf()[i], 1e-15);
}

TEST(HashedJoint, ProductSourceWithinLeftoverBound) {
    // X uniform-ish on 2^8 independent of Z; r = 2.
    Rng rng(10);
    std::vector<double> px(256);
    for (auto& v : px) v = 0.5 + rng.uniform01();
    const JointDist x(std::vector<std::size_t>{256}, px, true);
    const JointDist z(Dist({0.3, 0.7}));
    const auto joint = JointDist::product(x, z);
    const std::vector<std::size_t> lens{2};
    const auto res = evaluator::lhl_bound_check(joint, lens, 100, rng);
    EXPECT_TRUE(res.pass);
    EXPECT_LE(res.mean_tv, res.bound);
}

TEST(HashedJoint, TwoSourcesAgainstDirectPushforward) {
    Rng rng(12);
    std::vector<double> p(4 * 8 * 2);
    for (auto& v : p) v = rng.uniform01();
    const JointDist j({4, 8, 2}, p, true);
    const std::vector<ToeplitzHash> hs{sample_hash(rng, 2, 1), sample_hash(rng, 3, 2)};
    const auto out = hashed_joint_dist_exact(hs, j);
    std::vector<double> ref(2 * 4 * 2, 0.0);
    for (std::uint64_t a = 0; a < 4; ++a)
        for (std::uint64_t b = 0; b < 8; ++b)
            for (std::size_t z = 0; z < 2; ++z)
                ref[(hs[0].apply_packed(a) * 4 + hs[1].apply_packed(b)) * 2 + z] += j.pmf()[(a * 8 + b) * 2 + z];
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(out.pmf()[i], ref[i], 1e-15);
}

TEST(HashedJoint, BudgetGuard) {
    Rng rng(1);
    const JointDist j({16, 2}, std::vector<double>(32, 1.0 / 32));
    const std::vector<ToeplitzHash> hs{sample_hash(rng, 4, 1)};
    EXPECT_THROW(hashed_joint_dist_exact(hs, j, 8), BudgetExceeded);
}
