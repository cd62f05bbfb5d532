#include "lesplat/relevancy.hpp"

#include "lesplat/errors.hpp"

#include <cmath>
#include <set>

namespace lesplat {

namespace {

constexpr double kUnitTolerance = 1e-6;
constexpr double kNoEvidenceNorm = 1e-12;

void check_unit_rows(const RowMatrixXd& m, const char* what) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        if (!(std::abs(m.row(i).norm() - 1.0) <= kUnitTolerance)) {
            throw ValidationError(std::string(what) + " embeddings must be unit norm");
        }
    }
}

} // namespace

EmbeddingTable::EmbeddingTable(int dim, Provenance provenance) : dim_(dim), provenance_(provenance) {}

void EmbeddingTable::add(const std::string& phrase, const VectorXd& vector) {
    if (phrase.empty()) {
        throw ValidationError("embedding phrase must not be empty");
    }
    if (dim_ == 0 && entries_.empty()) {
        dim_ = static_cast<int>(vector.size());
    }
    if (vector.size() != dim_) {
        throw ValidationError("embedding for '" + phrase + "' has dimension " + std::to_string(vector.size()) +
                              ", table dimension is " + std::to_string(dim_));
    }
    if (!(std::abs(vector.norm() - 1.0) <= kUnitTolerance)) {
        throw ValidationError("embedding for '" + phrase + "' is not unit norm");
    }
    if (!index_.emplace(phrase, entries_.size()).second) {
        throw ValidationError("duplicate phrase '" + phrase + "'");
    }
    entries_.emplace_back(phrase, vector);
}

const VectorXd& EmbeddingTable::at(const std::string& phrase) const {
    const auto it = index_.find(phrase);
    if (it == index_.end()) {
        throw ValidationError("phrase '" + phrase + "' has no embedding");
    }
    return entries_[it->second].second;
}

RowMatrixXd EmbeddingTable::rows(const std::vector<std::string>& phrases) const {
    RowMatrixXd out(static_cast<Eigen::Index>(phrases.size()), dim_);
    for (std::size_t i = 0; i < phrases.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = at(phrases[i]).transpose();
    }
    return out;
}

void EmbeddingTable::set_codebook(Codebook cb) {
    if (dim_ != 0 && cb.dim() != dim_) {
        throw ValidationError("codebook dimension does not match the embedding table");
    }
    codebook_ = std::move(cb);
}

void validate(const QuerySpec& q) {
    if (q.main_positive.empty()) {
        throw ValidationError("query has no main positive");
    }
    const auto nh = q.helping_positives.size();
    const auto nc = q.canonicals.size();
    if (nh < 1 || nh > 4 || nc < 4 || nc > 6) {
        throw ValidationError("query needs 1-4 helping positives and 4-6 negatives, got " + std::to_string(nh) +
                              " helping and " + std::to_string(nc) + " negatives");
    }
    std::set<std::string> positives{q.main_positive};
    positives.insert(q.helping_positives.begin(), q.helping_positives.end());
    for (const auto& c : q.canonicals) {
        if (positives.contains(c)) {
            throw ValidationError("phrase '" + c + "' is both a positive and a negative");
        }
    }
}

FeatureMap feature_map(const SemanticDistributionMap<double>& m, const Codebook& codebook) {
    if (m.num_indices() != codebook.size()) {
        throw ValidationError("distribution map has K=" + std::to_string(m.num_indices()) + " but codebook has K=" +
                              std::to_string(codebook.size()));
    }
    return {m.width, m.height, m.probs * codebook.entries()};
}

RelevancyMap relevancy_score(const FeatureMap& features, const RowMatrixXd& positives, const RowMatrixXd& canonicals) {
    if (positives.rows() == 0 || canonicals.rows() == 0) {
        throw ValidationError("relevancy needs at least one positive and one canonical embedding");
    }
    const auto d = features.values.cols();
    if (positives.cols() != d || canonicals.cols() != d) {
        throw ValidationError("embedding dimension does not match the feature map");
    }
    check_unit_rows(positives, "positive");
    check_unit_rows(canonicals, "canonical");

    const Eigen::Index n = features.values.rows();
    RelevancyMap out{features.width, features.height, VectorXd::Constant(n, 0.5),
                     Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(n, false)};
    for (Eigen::Index px = 0; px < n; ++px) {
        const double norm = features.values.row(px).norm();
        if (!(norm >= kNoEvidenceNorm)) {
            out.no_evidence[px] = true;
            continue;
        }
        const VectorXd unit = features.values.row(px).transpose() / norm;
        const double pos = (positives * unit).maxCoeff();
        const VectorXd canon = canonicals * unit;
        // exp(p) / (exp(c) + exp(p)) = 1 / (1 + exp(c - p)); the minimum comes from the largest c.
        out.scores[px] = 1.0 / (1.0 + std::exp(canon.maxCoeff() - pos));
    }
    return out;
}

RowMatrixXd positive_embeddings(const QuerySpec& q, const EmbeddingTable& table, bool with_helping) {
    std::vector<std::string> phrases{q.main_positive};
    if (with_helping) {
        phrases.insert(phrases.end(), q.helping_positives.begin(), q.helping_positives.end());
    }
    return table.rows(phrases);
}

SegMask segment(const RelevancyMap& r, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw ValidationError("segmentation threshold must lie in (0,1)");
    }
    return {r.width, r.height, r.scores.array() > threshold};
}

} // namespace lesplat
