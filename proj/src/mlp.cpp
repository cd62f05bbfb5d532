#include "lesplat/mlp.hpp"

#include "lesplat/errors.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <numbers>
#include <random>

namespace lesplat {

VectorXd TwoLayerMlp::flatten() const {
    VectorXd flat(parameter_count());
    Eigen::Index at = 0;
    flat.segment(at, w1.size()) = w1.reshaped();
    at += w1.size();
    flat.segment(at, b1.size()) = b1;
    at += b1.size();
    flat.segment(at, w2.size()) = w2.reshaped();
    at += w2.size();
    flat.segment(at, b2.size()) = b2;
    return flat;
}

void TwoLayerMlp::unflatten(const VectorXd& flat) {
    if (flat.size() != parameter_count()) {
        throw ValidationError("parameter vector length does not match the network");
    }
    Eigen::Index at = 0;
    w1.reshaped() = flat.segment(at, w1.size());
    at += w1.size();
    b1 = flat.segment(at, b1.size());
    at += b1.size();
    w2.reshaped() = flat.segment(at, w2.size());
    at += w2.size();
    b2 = flat.segment(at, b2.size());
}

TwoLayerMlp TwoLayerMlp::zeros(int in, int hidden, int out) {
    return {MatrixXd::Zero(hidden, in), VectorXd::Zero(hidden), MatrixXd::Zero(out, hidden), VectorXd::Zero(out)};
}

TwoLayerMlp TwoLayerMlp::random(int in, int hidden, int out, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    TwoLayerMlp mlp = zeros(in, hidden, out);
    const double s1 = std::sqrt(2.0 / in);
    const double s2 = std::sqrt(2.0 / hidden);
    for (Eigen::Index i = 0; i < mlp.w1.size(); ++i) {
        mlp.w1.data()[i] = s1 * normal(rng);
    }
    for (Eigen::Index i = 0; i < mlp.w2.size(); ++i) {
        mlp.w2.data()[i] = s2 * normal(rng);
    }
    return mlp;
}

VectorXd decode(const DecoderMLP& mlp, const VectorXd& feature) {
    if (feature.size() != mlp.feature_dim()) {
        throw ValidationError("feature dimension does not match the decoder input");
    }
    return softmax(mlp.net.forward(feature));
}

RowMatrixXd decode(const DecoderMLP& mlp, const RowMatrixXd& features) {
    RowMatrixXd out(features.rows(), mlp.num_indices());
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        out.row(i) = decode(mlp, VectorXd(features.row(i).transpose())).transpose();
    }
    return out;
}

VectorXd positional_encoding(const Vector3d& position) {
    VectorXd enc(kEncodedPositionDim);
    enc.head<3>() = position;
    Eigen::Index at = 3;
    for (int k = 0; k < kEncodingFrequencies; ++k) {
        const double freq = std::ldexp(std::numbers::pi, k);
        for (int axis = 0; axis < 3; ++axis) {
            enc[at + axis] = std::sin(freq * position[axis]);
            enc[at + 3 + axis] = std::cos(freq * position[axis]);
        }
        at += 6;
    }
    return enc;
}

VectorXd smooth(const SmoothingMLP& mlp, const Vector3d& position) {
    return mlp.net.forward(positional_encoding(position));
}

// ---------------------------------------------------------------------------

namespace {

using json = nlohmann::json;

json matrix_json(const MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            row.push_back(m(r, c));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

MatrixXd json_matrix(const json& j, Eigen::Index rows, Eigen::Index cols) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
        throw ParseError("decoder matrix has the wrong number of rows");
    }
    MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const json& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
            throw ParseError("decoder matrix has the wrong number of columns");
        }
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
        }
    }
    return m;
}

} // namespace

std::string decoder_to_json(const DecoderMLP& mlp) {
    const auto& n = mlp.net;
    json doc = {{"version", 1},
                {"feature_dim", n.input_dim()},
                {"hidden", n.hidden_dim()},
                {"num_indices", n.output_dim()},
                {"w1", matrix_json(n.w1)},
                {"b1", matrix_json(n.b1)},
                {"w2", matrix_json(n.w2)},
                {"b2", matrix_json(n.b2)}};
    return doc.dump();
}

DecoderMLP decoder_from_json(const std::string& text) {
    try {
        const json doc = json::parse(text);
        const auto in = doc.at("feature_dim").get<Eigen::Index>();
        const auto hidden = doc.at("hidden").get<Eigen::Index>();
        const auto out = doc.at("num_indices").get<Eigen::Index>();
        if (in < 1 || hidden < 1 || out < 1) {
            throw ParseError("decoder dimensions must be positive");
        }
        DecoderMLP mlp;
        mlp.net.w1 = json_matrix(doc.at("w1"), hidden, in);
        mlp.net.b1 = json_matrix(doc.at("b1"), hidden, 1);
        mlp.net.w2 = json_matrix(doc.at("w2"), out, hidden);
        mlp.net.b2 = json_matrix(doc.at("b2"), out, 1);
        if (!mlp.net.all_finite()) {
            throw ParseError("decoder parameters must be finite");
        }
        return mlp;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed decoder JSON: ") + e.what());
    }
}

} // namespace lesplat
