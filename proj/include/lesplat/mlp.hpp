#pragma once

#include "lesplat/types.hpp"

#include <cstdint>
#include <string>

namespace lesplat {

inline constexpr int kHiddenWidth = 64;
inline constexpr int kEncodingFrequencies = 4;
inline constexpr int kEncodedPositionDim = 3 + 3 * 2 * kEncodingFrequencies; // 27

/// Two-layer perceptron: in -> hidden (ReLU) -> out. The decoder puts a softmax on top.
struct TwoLayerMlp {
    MatrixXd w1; // hidden x in
    VectorXd b1;
    MatrixXd w2; // out x hidden
    VectorXd b2;

    int input_dim() const { return static_cast<int>(w1.cols()); }
    int hidden_dim() const { return static_cast<int>(w1.rows()); }
    int output_dim() const { return static_cast<int>(w2.rows()); }
    Eigen::Index parameter_count() const { return w1.size() + b1.size() + w2.size() + b2.size(); }

    VectorXd forward(const VectorXd& x) const {
        return w2 * (w1 * x + b1).cwiseMax(0.0) + b2;
    }

    bool all_finite() const { return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite(); }

    /// Flat view used by the optimiser and the gradient checker: w1, b1, w2, b2 in column-major order.
    VectorXd flatten() const;
    void unflatten(const VectorXd& flat);

    static TwoLayerMlp zeros(int in, int hidden, int out);
    /// He-style initialisation from a seeded generator; biases start at zero.
    static TwoLayerMlp random(int in, int hidden, int out, std::uint64_t seed);
};

/// Compact feature s_G -> semantic index distribution over K codewords.
struct DecoderMLP {
    TwoLayerMlp net;

    int feature_dim() const { return net.input_dim(); }
    int num_indices() const { return net.output_dim(); }

    static DecoderMLP zeros(int feature_dim, int num_indices) {
        return {TwoLayerMlp::zeros(feature_dim, kHiddenWidth, num_indices)};
    }
    static DecoderMLP random(int feature_dim, int num_indices, std::uint64_t seed) {
        return {TwoLayerMlp::random(feature_dim, kHiddenWidth, num_indices, seed)};
    }
};

/// Position -> smoothed compact feature s_MLP (input is the 27-dim sinusoidal encoding).
struct SmoothingMLP {
    TwoLayerMlp net;

    int feature_dim() const { return net.output_dim(); }

    static SmoothingMLP random(int feature_dim, std::uint64_t seed) {
        return {TwoLayerMlp::random(kEncodedPositionDim, kHiddenWidth, feature_dim, seed)};
    }
};

/// Numerically stable softmax.
template <typename Derived>
VectorXd softmax(const Eigen::MatrixBase<Derived>& logits) {
    const VectorXd shifted = logits.array() - logits.maxCoeff();
    const VectorXd e = shifted.array().exp();
    return e / e.sum();
}

/// softmax(decoder(s)); every entry is strictly positive.
VectorXd decode(const DecoderMLP& mlp, const VectorXd& feature);

/// Row-wise decode of an n x d_c batch into an n x K matrix of distributions.
RowMatrixXd decode(const DecoderMLP& mlp, const RowMatrixXd& features);

/// (p, sin(2^k pi p), cos(2^k pi p)) for k = 0..3, grouped by frequency.
VectorXd positional_encoding(const Vector3d& position);

VectorXd smooth(const SmoothingMLP& mlp, const Vector3d& position);

std::string decoder_to_json(const DecoderMLP& mlp);
DecoderMLP decoder_from_json(const std::string& text);

} // namespace lesplat
