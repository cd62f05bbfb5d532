#pragma once

#include "lesplat/types.hpp"

#include <cstdint>
#include <vector>

namespace lesplat {

inline constexpr int kDefaultCodebookSize = 64;

/// K unit-norm codewords of dimension D (the quantised language feature matrix S).
class Codebook {
public:
    Codebook() = default;
    explicit Codebook(RowMatrixXd entries);

    const RowMatrixXd& entries() const { return entries_; }
    int size() const { return static_cast<int>(entries_.rows()); }
    int dim() const { return static_cast<int>(entries_.cols()); }

private:
    RowMatrixXd entries_;
};

struct KMeansOptions {
    int max_iterations = 100;
    double tolerance = 1e-6; // stop once no centroid moves further than this
};

/// Spherical k-means: k-means++ seeding, cosine assignment, centroids renormalised every
/// iteration. `features` holds one feature per row; rows need not be normalised but must be
/// non-zero. Deterministic for a fixed seed.
Codebook build_codebook(const RowMatrixXd& features, int k, std::uint64_t seed, const KMeansOptions& opts = {});

/// Row with the highest cosine similarity; ties go to the lowest index.
int assign(const VectorXd& feature, const Codebook& codebook);
std::vector<int> assign(const RowMatrixXd& features, const Codebook& codebook);

/// Mean of 1 - cos(feature, assigned codeword); lies in [0, 2].
double quantization_error(const RowMatrixXd& features, const Codebook& codebook);

} // namespace lesplat
