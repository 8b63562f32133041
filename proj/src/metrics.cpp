#include "maskfuse/metrics.hpp"

#include <cmath>
#include <fstream>
#include <string>

namespace maskfuse {

nlohmann::json stats_to_json(const FeatureStats& s) {
    return {{"mean", s.mean.data}, {"cov", s.cov.data}, {"n", s.n_samples}};
}

FeatureStats stats_from_json(const nlohmann::json& j) {
    FeatureStats s;
    std::vector<double> mean = j.at("mean").get<std::vector<double>>();
    std::vector<double> cov = j.at("cov").get<std::vector<double>>();
    const int64_t d = static_cast<int64_t>(mean.size());
    if (cov.size() != mean.size() * mean.size())
        throw ValidationError("stats_from_json: covariance is not D x D");
    s.mean = TensorD({1, d});
    s.mean.data = std::move(mean);
    s.cov = TensorD({d, d});
    s.cov.data = std::move(cov);
    s.n_samples = j.at("n").get<int64_t>();
    return s;
}

void save_stats(const std::string& path, const FeatureStats& s) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    f << stats_to_json(s).dump(2) << "\n";
}

FeatureStats load_stats(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path + ": stats parse failed: " + e.what());
    }
    return stats_from_json(j);
}

FeatureStats accumulate_stats(const TensorD& features) {
    check_2d(features, "accumulate_stats");
    const int64_t n = features.shape[0], d = features.shape[1];
    if (n < 2) throw ValidationError("accumulate_stats: need >= 2 samples, got " + std::to_string(n));

    FeatureStats s;
    s.n_samples = n;
    s.mean = TensorD({1, d});
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < d; ++j) s.mean(0, j) += features(i, j);
    for (int64_t j = 0; j < d; ++j) s.mean(0, j) /= static_cast<double>(n);

    s.cov = TensorD({d, d});
    for (int64_t i = 0; i < n; ++i)
        for (int64_t a = 0; a < d; ++a) {
            const double da = features(i, a) - s.mean(0, a);
            for (int64_t b = a; b < d; ++b) s.cov(a, b) += da * (features(i, b) - s.mean(0, b));
        }
    for (int64_t a = 0; a < d; ++a)
        for (int64_t b = a; b < d; ++b) {
            s.cov(a, b) /= static_cast<double>(n - 1);
            s.cov(b, a) = s.cov(a, b);
        }
    return s;
}

FeatureStats merge_stats(const FeatureStats& a, const FeatureStats& b) {
    if (a.mean.shape != b.mean.shape) throw ValidationError("merge_stats: dimension mismatch");
    const int64_t d = a.mean.shape[1];
    const double na = static_cast<double>(a.n_samples), nb = static_cast<double>(b.n_samples);
    const double n = na + nb;

    FeatureStats out;
    out.n_samples = a.n_samples + b.n_samples;
    out.mean = TensorD({1, d});
    for (int64_t j = 0; j < d; ++j) out.mean(0, j) = (na * a.mean(0, j) + nb * b.mean(0, j)) / n;

    // unbiased covariances recombine through the scatter matrices
    out.cov = TensorD({d, d});
    for (int64_t i = 0; i < d; ++i)
        for (int64_t j = 0; j < d; ++j) {
            const double scatter = (na - 1.0) * a.cov(i, j) + (nb - 1.0) * b.cov(i, j) +
                                   na * nb / n * (a.mean(0, i) - b.mean(0, i)) * (a.mean(0, j) - b.mean(0, j));
            out.cov(i, j) = scatter / (n - 1.0);
        }
    return out;
}

std::vector<double> jacobi_eigenvalues(const TensorD& sym, TensorD* vectors) {
    check_2d(sym, "jacobi");
    const int64_t n = sym.shape[0];
    if (sym.shape[1] != n) throw ValidationError("jacobi: matrix not square");
    TensorD a = sym;
    TensorD v({n, n});
    for (int64_t i = 0; i < n; ++i) v(i, i) = 1.0;

    const int max_sweeps = 100;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (int64_t p = 0; p < n; ++p)
            for (int64_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-24) {
            std::vector<double> eig(static_cast<size_t>(n));
            for (int64_t i = 0; i < n; ++i) eig[static_cast<size_t>(i)] = a(i, i);
            if (vectors) *vectors = v;
            return eig;
        }
        for (int64_t p = 0; p < n; ++p) {
            for (int64_t q = p + 1; q < n; ++q) {
                if (std::abs(a(p, q)) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int64_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (int64_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (int64_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    throw NumericError("jacobi: eigendecomposition did not converge in " + std::to_string(max_sweeps) +
                       " sweeps");
}

TensorD psd_sqrt(const TensorD& sym) {
    TensorD vec;
    std::vector<double> eig = jacobi_eigenvalues(sym, &vec);
    const int64_t n = sym.shape[0];
    TensorD out({n, n});
    for (size_t k = 0; k < eig.size(); ++k) {
        const double lam = eig[k] > 0.0 ? std::sqrt(eig[k]) : 0.0;
        if (lam == 0.0) continue;
        for (int64_t i = 0; i < n; ++i) {
            const double vi = vec(i, static_cast<int64_t>(k)) * lam;
            if (vi == 0.0) continue;
            for (int64_t j = 0; j < n; ++j) out(i, j) += vi * vec(j, static_cast<int64_t>(k));
        }
    }
    return out;
}

double frechet_distance(const FeatureStats& a, const FeatureStats& b) {
    if (a.mean.shape != b.mean.shape || a.cov.shape != b.cov.shape)
        throw ValidationError("frechet_distance: dimension mismatch");
    const int64_t d = a.mean.shape[1];

    double dist = 0.0;
    for (int64_t j = 0; j < d; ++j) {
        const double diff = a.mean(0, j) - b.mean(0, j);
        dist += diff * diff;
    }
    for (int64_t j = 0; j < d; ++j) dist += a.cov(j, j) + b.cov(j, j);

    // Tr((Sa Sb)^{1/2}) = Tr((Sa^{1/2} Sb Sa^{1/2})^{1/2})
    TensorD root_a = psd_sqrt(a.cov);
    TensorD m = matmul(matmul(root_a, b.cov), root_a);
    // enforce exact symmetry before the second root
    for (int64_t i = 0; i < d; ++i)
        for (int64_t j = i + 1; j < d; ++j) {
            const double avg = 0.5 * (m(i, j) + m(j, i));
            m(i, j) = avg;
            m(j, i) = avg;
        }
    std::vector<double> eig = jacobi_eigenvalues(m);
    double max_eig = 0.0;
    for (double lam : eig) max_eig = std::max(max_eig, lam);
    // eigenvalues at noise level inflate the trace through the square root;
    // clamp relative to the spectrum
    const double cutoff = max_eig * 1e-12;
    double trace_term = 0.0;
    for (double lam : eig)
        if (lam > cutoff) trace_term += std::sqrt(lam);
    return dist - 2.0 * trace_term;
}

double inception_score(const TensorD& probs) {
    check_2d(probs, "inception_score");
    const int64_t n = probs.shape[0], k = probs.shape[1];
    if (n < 1 || k < 1) throw ValidationError("inception_score: empty matrix");
    for (int64_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (int64_t j = 0; j < k; ++j) {
            if (probs(i, j) < 0.0) throw ValidationError("inception_score: negative probability");
            sum += probs(i, j);
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw ValidationError("inception_score: row " + std::to_string(i) + " sums to " +
                                  std::to_string(sum));
    }
    // column sum then one divide: exact for identical rows, so their KL is 0
    std::vector<double> marginal(static_cast<size_t>(k), 0.0);
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < k; ++j) marginal[static_cast<size_t>(j)] += probs(i, j);
    for (double& m : marginal) m /= static_cast<double>(n);

    double mean_kl = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        double kl = 0.0;
        for (int64_t j = 0; j < k; ++j) {
            const double p = probs(i, j);
            if (p > 0.0) kl += p * std::log(p / marginal[static_cast<size_t>(j)]);
        }
        mean_kl += kl;
    }
    return std::exp(mean_kl / static_cast<double>(n));
}

double mean_of_score(const std::vector<double>& scores) {
    if (scores.empty()) throw ValidationError("mean_of_score: empty score list");
    double sum = 0.0;
    for (double s : scores) sum += s;
    return sum / static_cast<double>(scores.size());
}

}  // namespace maskfuse
