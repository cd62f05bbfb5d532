#pragma once

#include "lesplat/errors.hpp"
#include "lesplat/types.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lesplat {

/// One language-embedded Gaussian. Colour is SH degree 0 (view independent).
template <typename Scalar>
struct Gaussian3 {
    Vec3<Scalar> position = Vec3<Scalar>::Zero();
    Vec3<Scalar> scale = Vec3<Scalar>::Ones();    // per-axis standard deviation
    Eigen::Quaternion<Scalar> rotation = Eigen::Quaternion<Scalar>::Identity();
    Scalar opacity = Scalar(1);
    Vec3<Scalar> color = Vec3<Scalar>::Zero();
    VecX<Scalar> semantic_feature;                 // compact feature s_G, length d_c
    Scalar uncertainty = Scalar(0);                // u_G
};

using Gaussian = Gaussian3<double>;

inline constexpr int kDefaultSemanticDim = 8;

template <typename Scalar>
void validate(const Gaussian3<Scalar>& g) {
    const auto in_unit = [](Scalar v) { return v >= Scalar(0) && v <= Scalar(1); };
    if (!g.position.allFinite()) {
        throw ValidationError("gaussian position must be finite");
    }
    if (!(std::abs(g.rotation.norm() - Scalar(1)) <= Scalar(1e-9))) {
        throw ValidationError("gaussian rotation must be a unit quaternion");
    }
    if (!(g.scale.array() > Scalar(0)).all() || !g.scale.allFinite()) {
        throw ValidationError("gaussian scale components must be strictly positive");
    }
    if (!in_unit(g.opacity) || !in_unit(g.uncertainty)) {
        throw ValidationError("gaussian opacity and uncertainty must lie in [0,1]");
    }
    for (int c = 0; c < 3; ++c) {
        if (!in_unit(g.color[c])) {
            throw ValidationError("gaussian color channels must lie in [0,1]");
        }
    }
    if (!g.semantic_feature.allFinite()) {
        throw ValidationError("gaussian semantic feature must be finite");
    }
}

/// Sigma = R diag(scale^2) R^T, symmetrised so the result is exactly symmetric.
template <typename Scalar>
Mat3<Scalar> covariance(const Gaussian3<Scalar>& g) {
    const Mat3<Scalar> r = g.rotation.toRotationMatrix();
    const Mat3<Scalar> sigma = r * g.scale.array().square().matrix().asDiagonal() * r.transpose();
    return Scalar(0.5) * (sigma + sigma.transpose());
}

/// Ordered, validated set of Gaussians plus a background colour. Immutable.
template <typename Scalar>
class BasicScene {
public:
    BasicScene() : background_(Vec3<Scalar>::Zero()) {}

    explicit BasicScene(std::vector<Gaussian3<Scalar>> gaussians,
                        Vec3<Scalar> background = Vec3<Scalar>::Zero())
        : gaussians_(std::move(gaussians)), background_(std::move(background)) {
        for (const auto& g : gaussians_) {
            validate(g);
            if (g.semantic_feature.size() != gaussians_.front().semantic_feature.size()) {
                throw ValidationError("all gaussians must share one semantic feature dimension");
            }
        }
        for (int c = 0; c < 3; ++c) {
            if (!(background_[c] >= Scalar(0) && background_[c] <= Scalar(1))) {
                throw ValidationError("background color channels must lie in [0,1]");
            }
        }
    }

    std::span<const Gaussian3<Scalar>> gaussians() const { return gaussians_; }
    const Gaussian3<Scalar>& operator[](std::size_t i) const { return gaussians_[i]; }
    std::size_t size() const { return gaussians_.size(); }
    bool empty() const { return gaussians_.empty(); }
    const Vec3<Scalar>& background_color() const { return background_; }

    int semantic_dim() const {
        return gaussians_.empty() ? 0 : static_cast<int>(gaussians_.front().semantic_feature.size());
    }

    /// Per-Gaussian semantic features as an N x d_c matrix.
    RowMatX<Scalar> semantic_features() const {
        RowMatX<Scalar> out(static_cast<Eigen::Index>(size()), semantic_dim());
        for (std::size_t i = 0; i < size(); ++i) {
            out.row(static_cast<Eigen::Index>(i)) = gaussians_[i].semantic_feature.transpose();
        }
        return out;
    }

    VecX<Scalar> uncertainties() const {
        VecX<Scalar> out(static_cast<Eigen::Index>(size()));
        for (std::size_t i = 0; i < size(); ++i) {
            out[static_cast<Eigen::Index>(i)] = gaussians_[i].uncertainty;
        }
        return out;
    }

    /// Copy of this scene with semantics replaced; geometry and appearance are kept.
    BasicScene with_semantics(const RowMatX<Scalar>& features, const VecX<Scalar>& uncertainty) const {
        if (features.rows() != static_cast<Eigen::Index>(size()) ||
            uncertainty.size() != static_cast<Eigen::Index>(size())) {
            throw ValidationError("semantic update does not match the number of gaussians");
        }
        std::vector<Gaussian3<Scalar>> next = gaussians_;
        for (std::size_t i = 0; i < next.size(); ++i) {
            next[i].semantic_feature = features.row(static_cast<Eigen::Index>(i)).transpose();
            next[i].uncertainty = uncertainty[static_cast<Eigen::Index>(i)];
        }
        return BasicScene(std::move(next), background_);
    }

private:
    std::vector<Gaussian3<Scalar>> gaussians_;
    Vec3<Scalar> background_;
};

using Scene = BasicScene<double>;

/// Pinhole camera. world_to_camera maps x_w to R x_w + t; the camera looks down +z,
/// image x to the right and image y down. Pixel (u, v) is sampled at its centre (u+0.5, v+0.5).
template <typename Scalar>
struct BasicCamera {
    Scalar fx = Scalar(1);
    Scalar fy = Scalar(1);
    Scalar cx = Scalar(0);
    Scalar cy = Scalar(0);
    int width = 1;
    int height = 1;
    Mat3<Scalar> rotation = Mat3<Scalar>::Identity();
    Vec3<Scalar> translation = Vec3<Scalar>::Zero();

    Vec3<Scalar> to_camera(const Vec3<Scalar>& world) const { return rotation * world + translation; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
};

using Camera = BasicCamera<double>;

template <typename Scalar>
void validate(const BasicCamera<Scalar>& cam) {
    if (!(cam.fx > Scalar(0)) || !(cam.fy > Scalar(0))) {
        throw ValidationError("camera focal lengths must be positive");
    }
    if (cam.width < 1 || cam.height < 1) {
        throw ValidationError("camera width and height must be at least 1");
    }
    const Mat3<Scalar> should_be_identity = cam.rotation * cam.rotation.transpose();
    if (!should_be_identity.isApprox(Mat3<Scalar>::Identity(), Scalar(1e-6)) ||
        !(cam.rotation.determinant() > Scalar(0))) {
        throw ValidationError("camera rotation must be a proper rotation matrix");
    }
}

/// Camera at `eye` looking at `target`, focal length chosen from a horizontal field of view.
Camera look_at(const Vector3d& eye, const Vector3d& target, const Vector3d& up, int width, int height,
               double horizontal_fov_deg);

// ---------------------------------------------------------------------------
// Synthetic labelled scenes

struct SyntheticClass {
    std::string name;
    Vector3d center = Vector3d::Zero();
    Vector3d half_extent = Vector3d::Ones();
    int count = 1;
    Vector3d color = Vector3d::Constant(0.5);
    double scale = 0.1;
};

struct SyntheticSceneSpec {
    std::vector<SyntheticClass> classes;
    double noise = 0.0;
    std::uint64_t seed = 0;
    double opacity = 0.9;
    double initial_uncertainty = 0.1;
    int semantic_dim = kDefaultSemanticDim;
    Vector3d background_color = Vector3d::Zero();
};

struct LabeledScene {
    Scene scene;
    std::vector<int> labels;              // class index per gaussian
    std::vector<std::string> class_names;
};

/// Deterministic for a fixed seed. Gaussians of a class are laid out on a sunflower lattice
/// inside the class box (the first one at the box centre) and jittered by `noise`.
LabeledScene make_synthetic_scene(const SyntheticSceneSpec& spec);

void validate(const SyntheticSceneSpec& spec);

// ---------------------------------------------------------------------------
// JSON documents

std::string scene_to_json(const Scene& scene);
Scene scene_from_json(const std::string& text);

std::string camera_to_json(const Camera& cam);
Camera camera_from_json(const std::string& text);

SyntheticSceneSpec synthetic_spec_from_json(const std::string& text);

} // namespace lesplat
