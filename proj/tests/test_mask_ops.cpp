#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "maskfuse/mask_ops.hpp"
#include "test_support.hpp"

using namespace maskfuse;
using testsup::oracle_rebinarize;
using testsup::random_mask;

namespace {

BinaryMask mirror_h(const BinaryMask& m) {
    BinaryMask out(m.height, m.width);
    for (int i = 0; i < m.height; ++i)
        for (int j = 0; j < m.width; ++j) out.at(i, j) = m.at(i, m.width - 1 - j);
    return out;
}

BinaryMask mirror_v(const BinaryMask& m) {
    BinaryMask out(m.height, m.width);
    for (int i = 0; i < m.height; ++i)
        for (int j = 0; j < m.width; ++j) out.at(i, j) = m.at(m.height - 1 - i, j);
    return out;
}

LatentMask mirror_h(const LatentMask& m) {
    LatentMask out = m;
    for (int i = 0; i < m.height; ++i)
        for (int j = 0; j < m.width; ++j) out.at(i, j) = m.at(i, m.width - 1 - j);
    return out;
}

}  // namespace

TEST_CASE("rebinarize: all-ones and all-zeros 32x32, P=16, tau=128") {
    BinaryMask ones(32, 32, 1);
    PatchMask pm = rebinarize_patches(ones, 16, 128);
    for (auto v : pm.values) CHECK(v == 1);

    BinaryMask zeros(32, 32, 0);
    pm = rebinarize_patches(zeros, 16, 128);
    for (auto v : pm.values) CHECK(v == 0);
}

TEST_CASE("rebinarize: threshold boundary at exactly tau zeros") {
    // 16x16 single patch; 129 zeros > tau=128 -> all-zero, 128 zeros -> all-one
    for (int zeros : {129, 128}) {
        BinaryMask m(16, 16, 1);
        for (int k = 0; k < zeros; ++k) m.values[static_cast<size_t>(k)] = 0;
        PatchMask pm = rebinarize_patches(m, 16, 128);
        const uint8_t expect = zeros > 128 ? 0 : 1;
        for (auto v : pm.values) CHECK(v == expect);
    }
}

TEST_CASE("rebinarize: errors") {
    BinaryMask m(30, 30, 1);
    CHECK_THROWS_AS(rebinarize_patches(m, 16, 10), ConfigError);

    BinaryMask bad(16, 16, 1);
    bad.values[5] = 2;
    CHECK_THROWS_AS(rebinarize_patches(bad, 16, 128), ValidationError);

    BinaryMask ok(16, 16, 1);
    CHECK_THROWS_AS(rebinarize_patches(ok, 16, -1), ConfigError);
    CHECK_THROWS_AS(rebinarize_patches(ok, 16, 257), ConfigError);
}

TEST_CASE("rebinarize: matches the zero-counting oracle, is idempotent and patch-uniform") {
    Rng rng(101);
    for (int trial = 0; trial < 50; ++trial) {
        const int p = (trial % 3 == 0) ? 4 : (trial % 3 == 1 ? 8 : 16);
        const int h = p * (1 + static_cast<int>(rng.uniform_int(3)));
        const int w = p * (1 + static_cast<int>(rng.uniform_int(3)));
        const int tau = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(p * p + 1)));
        BinaryMask m = random_mask(rng, h, w);

        PatchMask pm = rebinarize_patches(m, p, tau);
        CHECK_NOTHROW(pm.validate());

        BinaryMask oracle = oracle_rebinarize(m, p, tau);
        CHECK(pm.values == oracle.values);

        // idempotence: re-binarizing the result changes nothing
        BinaryMask as_mask(h, w);
        as_mask.values = pm.values;
        PatchMask again = rebinarize_patches(as_mask, p, tau);
        CHECK(again.values == pm.values);
    }
}

TEST_CASE("rebinarize: adding zeros never turns a 0-patch into a 1-patch") {
    Rng rng(202);
    for (int trial = 0; trial < 30; ++trial) {
        BinaryMask m = random_mask(rng, 16, 16);
        const int tau = static_cast<int>(rng.uniform_int(17));
        PatchMask before = rebinarize_patches(m, 4, tau);

        BinaryMask more = m;
        for (auto& v : more.values)
            if (v == 1 && rng.uniform() < 0.3) v = 0;
        PatchMask after = rebinarize_patches(more, 4, tau);

        for (size_t i = 0; i < before.values.size(); ++i)
            if (before.values[i] == 0) CHECK(after.values[i] == 0);
    }
}

TEST_CASE("flatten: all-ones 32x32, P=16, proj 8 -> 4x8 ones") {
    BinaryMask ones(32, 32, 1);
    FlatPatchMask fm = flatten_patch_mask(rebinarize_patches(ones, 16, 128), 8);
    CHECK(fm.rows == 4);
    CHECK(fm.cols == 8);
    for (auto v : fm.values) CHECK(v == 1);
}

TEST_CASE("flatten: top-left patch zero -> row 0 zeros, rows 1-3 ones") {
    BinaryMask m(32, 32, 1);
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 16; ++j) m.at(i, j) = 0;
    FlatPatchMask fm = flatten_patch_mask(rebinarize_patches(m, 16, 128), 8);
    for (int j = 0; j < 8; ++j) CHECK(fm.at(0, j) == 0);
    for (int i = 1; i < 4; ++i)
        for (int j = 0; j < 8; ++j) CHECK(fm.at(i, j) == 1);
}

TEST_CASE("flatten: 16x16 all-zeros, proj 4 -> 1x4 zeros") {
    BinaryMask zeros(16, 16, 0);
    FlatPatchMask fm = flatten_patch_mask(rebinarize_patches(zeros, 16, 128), 4);
    CHECK(fm.rows == 1);
    CHECK(fm.cols == 4);
    for (auto v : fm.values) CHECK(v == 0);
}

TEST_CASE("flatten: row-major patch enumeration against a hand-built oracle") {
    Rng rng(303);
    for (int trial = 0; trial < 20; ++trial) {
        const int p = 4;
        BinaryMask m = random_mask(rng, 16, 24);
        PatchMask pm = rebinarize_patches(m, p, 8);
        FlatPatchMask fm = flatten_patch_mask(pm, 7);
        CHECK(static_cast<int>(fm.values.size()) == fm.rows * fm.cols);

        const int pw = 24 / p;
        for (int k = 0; k < fm.rows; ++k) {
            const uint8_t bit = pm.at((k / pw) * p, (k % pw) * p);
            for (int j = 0; j < fm.cols; ++j) CHECK(fm.at(k, j) == bit);
        }
    }
}

TEST_CASE("flatten: rejects non-patch-uniform input") {
    PatchMask pm;
    pm.height = 8;
    pm.width = 8;
    pm.patch_size = 4;
    pm.values.assign(64, 1);
    pm.values[0] = 0;  // breaks uniformity of the first patch
    CHECK_THROWS_AS(flatten_patch_mask(pm, 8), ValidationError);
}

TEST_CASE("derive_latent_mask: trivial and split cases") {
    BinaryMask ones(32, 32, 1);
    LatentMask lm = derive_latent_mask(ones, 8);
    CHECK(lm.height == 4);
    CHECK(lm.width == 4);
    for (auto v : lm.values) CHECK(v == 1);

    BinaryMask zeros(32, 32, 0);
    lm = derive_latent_mask(zeros, 8);
    for (auto v : lm.values) CHECK(v == 0);

    BinaryMask half(16, 16, 0);
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 8; ++j) half.at(i, j) = 1;
    lm = derive_latent_mask(half, 8, 0.5);
    CHECK(lm.at(0, 0) == 1);
    CHECK(lm.at(0, 1) == 0);
    CHECK(lm.at(1, 0) == 1);
    CHECK(lm.at(1, 1) == 0);
}

TEST_CASE("derive_latent_mask: block-mean oracle and errors") {
    Rng rng(404);
    for (int trial = 0; trial < 20; ++trial) {
        BinaryMask m = random_mask(rng, 16, 16);
        LatentMask lm = derive_latent_mask(m, 4, 0.5);
        for (int li = 0; li < 4; ++li)
            for (int lj = 0; lj < 4; ++lj) {
                int ones = 0;
                for (int i = 0; i < 4; ++i)
                    for (int j = 0; j < 4; ++j) ones += m.at(li * 4 + i, lj * 4 + j);
                CHECK(lm.at(li, lj) == (ones / 16.0 >= 0.5 ? 1 : 0));
            }
    }
    BinaryMask m(10, 10, 1);
    CHECK_THROWS_AS(derive_latent_mask(m, 4), ConfigError);
    BinaryMask ok(16, 16, 1);
    CHECK_THROWS_AS(derive_latent_mask(ok, 4, 0.0), ConfigError);
}

TEST_CASE("derive_latent_mask commutes with mirroring") {
    Rng rng(505);
    for (int trial = 0; trial < 20; ++trial) {
        BinaryMask m = random_mask(rng, 24, 16);
        LatentMask a = derive_latent_mask(mirror_h(m), 4, 0.5);
        LatentMask b = mirror_h(derive_latent_mask(m, 4, 0.5));
        CHECK(a.values == b.values);

        LatentMask c = derive_latent_mask(mirror_v(m), 4, 0.5);
        LatentMask d = derive_latent_mask(m, 4, 0.5);
        for (int i = 0; i < c.height; ++i)
            for (int j = 0; j < c.width; ++j) CHECK(c.at(i, j) == d.at(c.height - 1 - i, j));
    }
}

TEST_CASE("complement is an involution") {
    Rng rng(606);
    BinaryMask m = random_mask(rng, 16, 16);
    CHECK(complement(complement(m)).values == m.values);
    for (size_t i = 0; i < m.values.size(); ++i) CHECK(complement(m).values[i] == 1 - m.values[i]);
}
