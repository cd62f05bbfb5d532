#include "lesplat/quantize.hpp"

#include "lesplat/errors.hpp"

#include <random>
#include <string>

namespace lesplat {

namespace {

constexpr double kUnitTolerance = 1e-6;
constexpr double kZeroNorm = 1e-12;

RowMatrixXd normalized_rows(const RowMatrixXd& features) {
    RowMatrixXd out = features;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        const double n = out.row(i).norm();
        if (!(n > kZeroNorm)) {
            throw ValidationError("feature " + std::to_string(i) + " has no direction (zero norm)");
        }
        out.row(i) /= n;
    }
    return out;
}

int best_row(const RowMatrixXd& entries, const auto& unit_feature) {
    int best = 0;
    double best_sim = entries.row(0).dot(unit_feature);
    for (Eigen::Index j = 1; j < entries.rows(); ++j) {
        const double sim = entries.row(j).dot(unit_feature);
        if (sim > best_sim) {
            best_sim = sim;
            best = static_cast<int>(j);
        }
    }
    return best;
}

} // namespace

Codebook::Codebook(RowMatrixXd entries) : entries_(std::move(entries)) {
    if (entries_.rows() < 1 || entries_.cols() < 1) {
        throw ValidationError("codebook needs at least one codeword of positive dimension");
    }
    for (Eigen::Index i = 0; i < entries_.rows(); ++i) {
        if (!(std::abs(entries_.row(i).norm() - 1.0) <= kUnitTolerance)) {
            throw ValidationError("codeword " + std::to_string(i) + " is not unit norm");
        }
    }
}

Codebook build_codebook(const RowMatrixXd& features, int k, std::uint64_t seed, const KMeansOptions& opts) {
    if (k < 1) {
        throw ValidationError("codebook size must be at least 1");
    }
    if (features.rows() < k) {
        throw ValidationError("need at least K=" + std::to_string(k) + " features, got " +
                              std::to_string(features.rows()));
    }
    const RowMatrixXd x = normalized_rows(features);
    const Eigen::Index n = x.rows();
    std::mt19937_64 rng(seed);

    // k-means++ on the sphere: squared chord distance is 2 (1 - cos).
    RowMatrixXd centroids(k, x.cols());
    std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
    centroids.row(0) = x.row(first(rng));
    VectorXd dist = (1.0 - (x * centroids.row(0).transpose()).array()).cwiseMax(0.0);
    for (int c = 1; c < k; ++c) {
        const double total = dist.sum();
        Eigen::Index pick = 0;
        if (total > 0.0) {
            std::uniform_real_distribution<double> u(0.0, total);
            double target = u(rng);
            for (pick = 0; pick < n - 1; ++pick) {
                target -= dist[pick];
                if (target < 0.0) {
                    break;
                }
            }
            // Guard against landing on an already-chosen point through rounding.
            while (dist[pick] <= 0.0 && pick > 0) {
                --pick;
            }
        } else {
            pick = first(rng);
        }
        centroids.row(c) = x.row(pick);
        dist = dist.cwiseMin((1.0 - (x * centroids.row(c).transpose()).array()).cwiseMax(0.0).matrix());
    }

    std::vector<int> labels(static_cast<std::size_t>(n), 0);
    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        for (Eigen::Index i = 0; i < n; ++i) {
            labels[static_cast<std::size_t>(i)] = best_row(centroids, x.row(i));
        }
        RowMatrixXd sums = RowMatrixXd::Zero(k, x.cols());
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.row(labels[static_cast<std::size_t>(i)]) += x.row(i);
        }
        double shift = 0.0;
        for (int c = 0; c < k; ++c) {
            const double norm = sums.row(c).norm();
            if (!(norm > kZeroNorm)) {
                continue; // empty or cancelling cluster keeps its centroid
            }
            const auto next = sums.row(c) / norm;
            shift = std::max(shift, (next - centroids.row(c)).norm());
            centroids.row(c) = next;
        }
        if (shift < opts.tolerance) {
            break;
        }
    }
    return Codebook(std::move(centroids));
}

int assign(const VectorXd& feature, const Codebook& codebook) {
    if (feature.size() != codebook.dim()) {
        throw ValidationError("feature dimension does not match the codebook");
    }
    const double n = feature.norm();
    if (!(n > kZeroNorm)) {
        throw ValidationError("cannot assign a zero vector");
    }
    return best_row(codebook.entries(), (feature / n).transpose());
}

std::vector<int> assign(const RowMatrixXd& features, const Codebook& codebook) {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(features.rows()));
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        out.push_back(assign(VectorXd(features.row(i).transpose()), codebook));
    }
    return out;
}

double quantization_error(const RowMatrixXd& features, const Codebook& codebook) {
    if (features.rows() == 0) {
        throw ValidationError("quantization error of an empty feature set is undefined");
    }
    double total = 0.0;
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        const VectorXd f = features.row(i).transpose();
        const int j = assign(f, codebook);
        total += 1.0 - codebook.entries().row(j).dot(f) / f.norm();
    }
    return total / static_cast<double>(features.rows());
}

} // namespace lesplat
