#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "maskfuse/core/tensor.hpp"

namespace maskfuse {

// Sample mean and unbiased covariance of a feature stream.
struct FeatureStats {
    TensorD mean;  // 1 × D
    TensorD cov;   // D × D, symmetric PSD
    int64_t n_samples = 0;
};

// Two-pass mean/covariance over >= 2 samples (rows of `features`).
FeatureStats accumulate_stats(const TensorD& features);

// Exact pairwise merge of two stats over disjoint streams.
FeatureStats merge_stats(const FeatureStats& a, const FeatureStats& b);

// JSON form: {"mean": [...], "cov": [...row-major...], "n": N}
nlohmann::json stats_to_json(const FeatureStats& s);
FeatureStats stats_from_json(const nlohmann::json& j);
void save_stats(const std::string& path, const FeatureStats& s);
FeatureStats load_stats(const std::string& path);

// ||mu_a - mu_b||^2 + Tr(Sa + Sb - 2 (Sa Sb)^{1/2}), matrix square roots via
// Jacobi eigendecomposition of the symmetrized product with eigenvalues
// clamped at zero.
double frechet_distance(const FeatureStats& a, const FeatureStats& b);

// exp(mean_i KL(p_i || p_bar)) over the rows of a class-probability matrix.
double inception_score(const TensorD& probs);

double mean_of_score(const std::vector<double>& scores);

// Symmetric eigendecomposition by cyclic Jacobi rotations. Returns
// eigenvalues; eigenvectors land in the columns of `vectors` when non-null.
std::vector<double> jacobi_eigenvalues(const TensorD& sym, TensorD* vectors = nullptr);

// PSD square root via Jacobi, eigenvalues clamped at 0.
TensorD psd_sqrt(const TensorD& sym);

}  // namespace maskfuse
