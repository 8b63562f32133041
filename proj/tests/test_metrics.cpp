#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "maskfuse/metrics.hpp"
#include "test_support.hpp"

using namespace maskfuse;
using testsup::naive_matmul;
using testsup::naive_transpose;
using testsup::random_tensor;

namespace {

FeatureStats stats_1d(double mean, double var) {
    FeatureStats s;
    s.mean = TensorD({1, 1});
    s.mean(0, 0) = mean;
    s.cov = TensorD({1, 1});
    s.cov(0, 0) = var;
    s.n_samples = 100;
    return s;
}

// Gram-Schmidt on random columns
TensorD random_orthogonal(Rng& rng, int n) {
    TensorD a = random_tensor(rng, {n, n});
    for (int64_t j = 0; j < n; ++j) {
        for (int64_t k = 0; k < j; ++k) {
            double dot = 0.0;
            for (int64_t i = 0; i < n; ++i) dot += a(i, j) * a(i, k);
            for (int64_t i = 0; i < n; ++i) a(i, j) -= dot * a(i, k);
        }
        double norm = 0.0;
        for (int64_t i = 0; i < n; ++i) norm += a(i, j) * a(i, j);
        norm = std::sqrt(norm);
        for (int64_t i = 0; i < n; ++i) a(i, j) /= norm;
    }
    return a;
}

}  // namespace

TEST_CASE("accumulate_stats: identical pair, hand case, permutation invariance") {
    TensorD same({2, 3});
    for (int64_t j = 0; j < 3; ++j) {
        same(0, j) = 1.5;
        same(1, j) = 1.5;
    }
    FeatureStats s = accumulate_stats(same);
    for (int64_t j = 0; j < 3; ++j) CHECK(s.mean(0, j) == 1.5);
    for (double v : s.cov.data) CHECK(v == 0.0);

    TensorD two({2, 2});
    two(0, 0) = 0.0;
    two(1, 0) = 2.0;
    s = accumulate_stats(two);
    CHECK(s.mean(0, 0) == 1.0);
    CHECK(s.mean(0, 1) == 0.0);
    CHECK(s.cov(0, 0) == 2.0);  // unbiased divisor n-1 = 1
    CHECK(s.cov(0, 1) == 0.0);
    CHECK(s.cov(1, 1) == 0.0);

    Rng rng(91);
    TensorD f = random_tensor(rng, {7, 3});
    TensorD perm({7, 3});
    for (int64_t i = 0; i < 7; ++i)
        for (int64_t j = 0; j < 3; ++j) perm(i, j) = f((i + 3) % 7, j);
    FeatureStats a = accumulate_stats(f);
    FeatureStats b = accumulate_stats(perm);
    CHECK(testsup::max_abs_diff(a.mean, b.mean) <= 1e-12);
    CHECK(testsup::max_abs_diff(a.cov, b.cov) <= 1e-12);

    TensorD one({1, 3});
    CHECK_THROWS_AS(static_cast<void>(accumulate_stats(one)), ValidationError);
}

TEST_CASE("merge_stats is exact and order-independent") {
    Rng rng(92);
    TensorD all = random_tensor(rng, {20, 4});
    TensorD head({12, 4}), tail({8, 4});
    for (int64_t i = 0; i < 12; ++i)
        for (int64_t j = 0; j < 4; ++j) head(i, j) = all(i, j);
    for (int64_t i = 0; i < 8; ++i)
        for (int64_t j = 0; j < 4; ++j) tail(i, j) = all(12 + i, j);

    FeatureStats whole = accumulate_stats(all);
    FeatureStats ab = merge_stats(accumulate_stats(head), accumulate_stats(tail));
    FeatureStats ba = merge_stats(accumulate_stats(tail), accumulate_stats(head));
    CHECK(testsup::max_abs_diff(whole.mean, ab.mean) <= 1e-9);
    CHECK(testsup::max_abs_diff(whole.cov, ab.cov) <= 1e-9);
    CHECK(testsup::max_abs_diff(ab.cov, ba.cov) <= 1e-9);
}

TEST_CASE("frechet_distance: identical stats give zero") {
    Rng rng(93);
    FeatureStats s = accumulate_stats(random_tensor(rng, {30, 5}));
    CHECK(std::abs(frechet_distance(s, s)) <= 1e-8);
}

TEST_CASE("frechet_distance: 1-D closed form (0,1) vs (1,4) equals 2") {
    FeatureStats a = stats_1d(0.0, 1.0);
    FeatureStats b = stats_1d(1.0, 4.0);
    CHECK(frechet_distance(a, b) == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(frechet_distance(b, a) == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("frechet_distance: diagonal covariances reduce to the 1-D sum") {
    Rng rng(94);
    const int d = 5;
    FeatureStats a, b;
    a.mean = random_tensor(rng, {1, d});
    b.mean = random_tensor(rng, {1, d});
    a.cov = TensorD({d, d});
    b.cov = TensorD({d, d});
    a.n_samples = b.n_samples = 10;
    double expect = 0.0;
    for (int64_t j = 0; j < d; ++j) {
        const double va = rng.uniform(0.1, 3.0), vb = rng.uniform(0.1, 3.0);
        a.cov(j, j) = va;
        b.cov(j, j) = vb;
        const double dm = a.mean(0, j) - b.mean(0, j);
        expect += dm * dm + (std::sqrt(va) - std::sqrt(vb)) * (std::sqrt(va) - std::sqrt(vb));
    }
    CHECK(frechet_distance(a, b) == doctest::Approx(expect).epsilon(1e-8));
}

TEST_CASE("frechet_distance: symmetry and rotation invariance") {
    Rng rng(95);
    const int d = 4;
    TensorD fa = random_tensor(rng, {25, d});
    TensorD fb = random_tensor(rng, {19, d}, -0.5, 2.0);
    FeatureStats a = accumulate_stats(fa);
    FeatureStats b = accumulate_stats(fb);
    const double base = frechet_distance(a, b);
    CHECK(base >= 0.0);
    CHECK(testsup::rel_err(base, frechet_distance(b, a)) <= 1e-8);

    TensorD q = random_orthogonal(rng, d);
    FeatureStats ar = accumulate_stats(naive_matmul(fa, q));
    FeatureStats br = accumulate_stats(naive_matmul(fb, q));
    CHECK(testsup::rel_err(base, frechet_distance(ar, br)) <= 1e-6);
}

TEST_CASE("frechet_distance input validation") {
    FeatureStats a = stats_1d(0.0, 1.0);
    FeatureStats b;
    b.mean = TensorD({1, 2});
    b.cov = TensorD({2, 2});
    b.n_samples = 5;
    CHECK_THROWS_AS(static_cast<void>(frechet_distance(a, b)), ValidationError);
}

TEST_CASE("psd_sqrt squares back to the input") {
    Rng rng(96);
    TensorD m = random_tensor(rng, {5, 5});
    TensorD psd = naive_matmul(m, naive_transpose(m));  // PSD by construction
    TensorD root = psd_sqrt(psd);
    TensorD back = naive_matmul(root, root);
    CHECK(testsup::max_abs_diff(back, psd) <= 1e-9);
}

TEST_CASE("inception_score: identical rows, one-hot rows, brute-force oracle") {
    TensorD uniform({4, 5});
    for (auto& v : uniform.data) v = 0.2;
    CHECK(inception_score(uniform) == 1.0);

    const int k = 6;
    TensorD onehot({k, k});
    for (int i = 0; i < k; ++i) onehot(i, i) = 1.0;
    CHECK(inception_score(onehot) == doctest::Approx(static_cast<double>(k)).epsilon(1e-9));

    Rng rng(97);
    for (int trial = 0; trial < 10; ++trial) {
        TensorD p({10, 5});
        for (int64_t i = 0; i < 10; ++i) {
            double sum = 0.0;
            for (int64_t j = 0; j < 5; ++j) {
                p(i, j) = rng.uniform(1e-4, 1.0);
                sum += p(i, j);
            }
            for (int64_t j = 0; j < 5; ++j) p(i, j) /= sum;
        }
        // brute-force double loop
        std::vector<double> marg(5, 0.0);
        for (int64_t i = 0; i < 10; ++i)
            for (int64_t j = 0; j < 5; ++j) marg[static_cast<size_t>(j)] += p(i, j) / 10.0;
        double mean_kl = 0.0;
        for (int64_t i = 0; i < 10; ++i)
            for (int64_t j = 0; j < 5; ++j)
                mean_kl += p(i, j) * std::log(p(i, j) / marg[static_cast<size_t>(j)]) / 10.0;
        const double got = inception_score(p);
        CHECK(std::abs(got - std::exp(mean_kl)) <= 1e-12);
        CHECK(got >= 1.0);
    }
}

TEST_CASE("inception_score input validation") {
    TensorD bad_sum({2, 2});
    bad_sum(0, 0) = 0.6;
    bad_sum(0, 1) = 0.6;
    bad_sum(1, 0) = 0.5;
    bad_sum(1, 1) = 0.5;
    CHECK_THROWS_AS(static_cast<void>(inception_score(bad_sum)), ValidationError);

    TensorD negative({1, 2});
    negative(0, 0) = -0.5;
    negative(0, 1) = 1.5;
    CHECK_THROWS_AS(static_cast<void>(inception_score(negative)), ValidationError);
}

TEST_CASE("stats JSON serialization round trip") {
    Rng rng(98);
    FeatureStats s = accumulate_stats(random_tensor(rng, {12, 3}));
    FeatureStats back = stats_from_json(stats_to_json(s));
    CHECK(back.mean.data == s.mean.data);
    CHECK(back.cov.data == s.cov.data);
    CHECK(back.n_samples == s.n_samples);

    const auto dir = std::filesystem::temp_directory_path() / "maskfuse_metrics_test";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "stats.json").string();
    save_stats(path, s);
    FeatureStats loaded = load_stats(path);
    CHECK(loaded.mean.data == s.mean.data);
    CHECK(std::abs(frechet_distance(s, loaded)) <= 1e-8);

    nlohmann::json bad = {{"mean", {1.0, 2.0}}, {"cov", {1.0, 0.0, 1.0}}, {"n", 4}};
    CHECK_THROWS_AS(static_cast<void>(stats_from_json(bad)), ValidationError);
}

TEST_CASE("mean_of_score") {
    CHECK(mean_of_score({5.0}) == 5.0);
    CHECK(mean_of_score({1.0, 2.0, 3.0, 4.0}) == 2.5);
    CHECK(mean_of_score({4.0, 1.0, 3.0, 2.0}) == 2.5);
    CHECK_THROWS_AS(static_cast<void>(mean_of_score({})), ValidationError);
}
