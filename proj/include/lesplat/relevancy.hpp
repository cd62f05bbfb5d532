#pragma once

#include "lesplat/quantize.hpp"
#include "lesplat/render.hpp"

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lesplat {

/// The fixed canonical set used by earlier language-field work.
inline constexpr std::array<std::string_view, 4> kPredefinedCanonicals = {"object", "things", "stuff", "texture"};

inline constexpr double kDefaultThreshold = 0.5;

enum class Provenance { Synthetic, Exported };

/// Phrase -> unit-norm text embedding, in insertion order. Optionally carries the codebook S.
class EmbeddingTable {
public:
    explicit EmbeddingTable(int dim = 0, Provenance provenance = Provenance::Exported);

    void add(const std::string& phrase, const VectorXd& vector);

    bool contains(const std::string& phrase) const { return index_.contains(phrase); }
    const VectorXd& at(const std::string& phrase) const;
    /// Stacks the vectors of `phrases` as rows.
    RowMatrixXd rows(const std::vector<std::string>& phrases) const;

    int dim() const { return dim_; }
    std::size_t size() const { return entries_.size(); }
    Provenance provenance() const { return provenance_; }
    const std::vector<std::pair<std::string, VectorXd>>& entries() const { return entries_; }

    const std::optional<Codebook>& codebook() const { return codebook_; }
    void set_codebook(Codebook cb);

private:
    int dim_;
    Provenance provenance_;
    std::vector<std::pair<std::string, VectorXd>> entries_;
    std::map<std::string, std::size_t, std::less<>> index_;
    std::optional<Codebook> codebook_;
};

/// LLM-provided query: one main positive, 1-4 helping positives, 4-6 canonicals (the "negatives").
struct QuerySpec {
    std::string main_positive;
    std::vector<std::string> helping_positives;
    std::vector<std::string> canonicals;

    bool operator==(const QuerySpec&) const = default;
};

/// Checks the count ranges and that no phrase is both positive and canonical.
void validate(const QuerySpec& q);

struct FeatureMap {
    int width = 0;
    int height = 0;
    RowMatrixXd values; // pixels x D
};

struct RelevancyMap {
    int width = 0;
    int height = 0;
    VectorXd scores;                          // one per pixel, strictly inside (0,1)
    Eigen::Array<bool, Eigen::Dynamic, 1> no_evidence; // pixels whose feature had zero norm
};

struct SegMask {
    int width = 0;
    int height = 0;
    Eigen::Array<bool, Eigen::Dynamic, 1> pixels;

    Eigen::Index count() const { return pixels.count(); }
};

/// F = M_infer S.
FeatureMap feature_map(const SemanticDistributionMap<double>& m, const Codebook& codebook);

/// Per pixel: min over canonicals c of exp(s_pos) / (exp(s_c) + exp(s_pos)), where s_pos is the
/// best cosine similarity over the positives. Pixels with |F| < 1e-12 score 0.5 and are flagged.
RelevancyMap relevancy_score(const FeatureMap& features, const RowMatrixXd& positives, const RowMatrixXd& canonicals);

/// Main positive plus (optionally) the helping positives, looked up in `table`.
RowMatrixXd positive_embeddings(const QuerySpec& q, const EmbeddingTable& table, bool with_helping = true);

/// Strict `score > threshold`.
SegMask segment(const RelevancyMap& r, double threshold = kDefaultThreshold);

} // namespace lesplat
