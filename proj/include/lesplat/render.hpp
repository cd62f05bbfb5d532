#pragma once

#include "lesplat/errors.hpp"
#include "lesplat/mlp.hpp"
#include "lesplat/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <thread>
#include <vector>

namespace lesplat {

inline constexpr double kNearPlane = 0.01;
inline constexpr double kCov2dRegularizer = 0.3;
inline constexpr double kMaxAlpha = 0.99;
inline constexpr double kDegenerateDeterminant = 1e-12;

template <typename Scalar>
struct Splat2D {
    Vec2<Scalar> mean2d;
    Mat2<Scalar> cov2d;
    Scalar depth;
    std::size_t source_index = 0;
};

/// Perspective projection with the EWA affine approximation of the covariance.
/// Returns nothing for Gaussians at or behind the near plane.
template <typename Scalar>
std::optional<Splat2D<Scalar>> project(const Gaussian3<Scalar>& g, const BasicCamera<Scalar>& cam,
                                       std::size_t source_index = 0) {
    const Vec3<Scalar> p = cam.to_camera(g.position);
    const Scalar z = p.z();
    if (!(z > Scalar(kNearPlane))) {
        return std::nullopt;
    }
    Eigen::Matrix<Scalar, 2, 3> jac;
    jac << cam.fx / z, Scalar(0), -cam.fx * p.x() / (z * z),
           Scalar(0), cam.fy / z, -cam.fy * p.y() / (z * z);
    const Eigen::Matrix<Scalar, 2, 3> jw = jac * cam.rotation;

    Splat2D<Scalar> s;
    s.mean2d = Vec2<Scalar>(cam.fx * p.x() / z + cam.cx, cam.fy * p.y() / z + cam.cy);
    s.cov2d = jw * covariance(g) * jw.transpose() + Scalar(kCov2dRegularizer) * Mat2<Scalar>::Identity();
    s.cov2d = Scalar(0.5) * (s.cov2d + s.cov2d.transpose());
    s.depth = z;
    s.source_index = source_index;
    return s;
}

template <typename Scalar>
struct CompositeResult {
    VecX<Scalar> value;
    Scalar transmittance;
};

/// Front-to-back alpha compositing: value = sum_i T_i a_i payload_i, T_1 = 1, T_{i+1} = T_i (1 - a_i).
/// `payloads` holds one payload per row. Stops once T drops below `early_exit` (0 disables).
template <typename Scalar>
CompositeResult<Scalar> composite(const VecX<Scalar>& alphas, const RowMatX<Scalar>& payloads,
                                  Scalar early_exit = Scalar(0)) {
    if (alphas.size() != payloads.rows()) {
        throw ValidationError("composite: one alpha per payload row required");
    }
    CompositeResult<Scalar> out{VecX<Scalar>::Zero(payloads.cols()), Scalar(1)};
    for (Eigen::Index i = 0; i < alphas.size(); ++i) {
        const Scalar a = alphas[i];
        if (!(a >= Scalar(0) && a < Scalar(1))) {
            throw ValidationError("composite: alpha must lie in [0,1)");
        }
        out.value += (out.transmittance * a) * payloads.row(i).transpose();
        out.transmittance *= Scalar(1) - a;
        if (out.transmittance < early_exit) {
            break;
        }
    }
    return out;
}

struct RenderOptions {
    /// Compositing stops once transmittance falls below this. Small enough that the skipped
    /// tail stays under 1e-6 of any unit-bounded payload.
    double early_exit_transmittance = 1e-7;
    /// Splats whose alpha at a pixel falls below this are skipped (0 keeps every splat).
    double min_alpha = 0.0;
    /// Worker threads for rendering; 0 means hardware concurrency. Never changes the output.
    unsigned threads = 0;
};

template <typename Scalar>
struct RenderedImage {
    int width = 0;
    int height = 0;
    RowMatX<Scalar> pixels; // (height * width) x 3, row-major pixel order

    Vec3<Scalar> at(int x, int y) const { return pixels.row(static_cast<Eigen::Index>(y) * width + x).transpose(); }
};

/// Per-pixel distribution over K semantic indices; 1 - row sum is background mass.
template <typename Scalar>
struct SemanticDistributionMap {
    int width = 0;
    int height = 0;
    RowMatX<Scalar> probs; // (height * width) x K

    int num_indices() const { return static_cast<int>(probs.cols()); }
    VecX<Scalar> at(int x, int y) const { return probs.row(static_cast<Eigen::Index>(y) * width + x).transpose(); }
};

namespace detail {

template <typename Scalar>
struct PreparedSplat {
    Vec2<Scalar> mean;
    Mat2<Scalar> conic; // inverse of cov2d
    Scalar opacity;
    Scalar depth;
    std::size_t index;
};

/// Projects every Gaussian and sorts front to back; ties keep scene order.
template <typename Scalar>
std::vector<PreparedSplat<Scalar>> prepare_splats(const BasicScene<Scalar>& scene, const BasicCamera<Scalar>& cam) {
    validate(cam);
    std::vector<PreparedSplat<Scalar>> splats;
    splats.reserve(scene.size());
    for (std::size_t i = 0; i < scene.size(); ++i) {
        const auto s = project(scene[i], cam, i);
        if (!s) {
            continue;
        }
        const Scalar det = s->cov2d.determinant();
        if (!(det > Scalar(kDegenerateDeterminant))) {
            continue;
        }
        splats.push_back({s->mean2d, s->cov2d.inverse(), scene[i].opacity, s->depth, i});
    }
    std::stable_sort(splats.begin(), splats.end(),
                     [](const auto& a, const auto& b) { return a.depth < b.depth; });
    return splats;
}

/// Walks the sorted splats for one pixel, calling on_weight(gaussian index, T_i a_i).
/// Returns the transmittance left for the background.
template <typename Scalar, typename OnWeight>
Scalar composite_pixel(std::span<const PreparedSplat<Scalar>> splats, Scalar px, Scalar py,
                       const RenderOptions& opts, OnWeight&& on_weight) {
    Scalar t = Scalar(1);
    for (const auto& s : splats) {
        const Vec2<Scalar> d(px - s.mean.x(), py - s.mean.y());
        const Scalar power = Scalar(-0.5) * d.dot(s.conic * d);
        const Scalar alpha = std::min(Scalar(kMaxAlpha), s.opacity * std::exp(power));
        if (alpha <= Scalar(opts.min_alpha)) {
            continue;
        }
        on_weight(s.index, t * alpha);
        t *= Scalar(1) - alpha;
        if (t < Scalar(opts.early_exit_transmittance)) {
            break;
        }
    }
    return t;
}

/// Runs row_fn(y) for every row; rows are disjoint so outputs do not depend on the thread count.
template <typename RowFn>
void for_each_row(int height, unsigned threads, RowFn&& row_fn) {
    unsigned n = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
    n = std::min<unsigned>(n, static_cast<unsigned>(height));
    if (n <= 1) {
        for (int y = 0; y < height; ++y) {
            row_fn(y);
        }
        return;
    }
    std::vector<std::jthread> workers;
    workers.reserve(n);
    for (unsigned w = 0; w < n; ++w) {
        workers.emplace_back([&, w] {
            for (int y = static_cast<int>(w); y < height; y += static_cast<int>(n)) {
                row_fn(y);
            }
        });
    }
}

} // namespace detail

/// Splats RGB colours and blends the leftover transmittance into the background.
template <typename Scalar>
RenderedImage<Scalar> render_color(const BasicScene<Scalar>& scene, const BasicCamera<Scalar>& cam,
                                   const RenderOptions& opts = {}) {
    const auto splats = detail::prepare_splats(scene, cam);
    RenderedImage<Scalar> img{cam.width, cam.height, RowMatX<Scalar>(static_cast<Eigen::Index>(cam.pixel_count()), 3)};
    detail::for_each_row(cam.height, opts.threads, [&](int y) {
        for (int x = 0; x < cam.width; ++x) {
            Vec3<Scalar> c = Vec3<Scalar>::Zero();
            const Scalar t = detail::composite_pixel<Scalar>(
                splats, Scalar(x) + Scalar(0.5), Scalar(y) + Scalar(0.5), opts,
                [&](std::size_t i, Scalar w) { c += w * scene[i].color; });
            img.pixels.row(static_cast<Eigen::Index>(y) * cam.width + x) = (c + t * scene.background_color()).transpose();
        }
    });
    return img;
}

/// Composites one payload row per Gaussian (N x P) into a (pixels x P) map, no background term.
template <typename Scalar>
RowMatX<Scalar> render_payload(const BasicScene<Scalar>& scene, const BasicCamera<Scalar>& cam,
                               const RowMatX<Scalar>& payloads, const RenderOptions& opts = {}) {
    if (payloads.rows() != static_cast<Eigen::Index>(scene.size())) {
        throw ValidationError("render_payload: one payload row per gaussian required");
    }
    const auto splats = detail::prepare_splats(scene, cam);
    RowMatX<Scalar> out = RowMatX<Scalar>::Zero(static_cast<Eigen::Index>(cam.pixel_count()), payloads.cols());
    detail::for_each_row(cam.height, opts.threads, [&](int y) {
        for (int x = 0; x < cam.width; ++x) {
            auto row = out.row(static_cast<Eigen::Index>(y) * cam.width + x);
            detail::composite_pixel<Scalar>(splats, Scalar(x) + Scalar(0.5), Scalar(y) + Scalar(0.5), opts,
                                            [&](std::size_t i, Scalar w) {
                                                row += w * payloads.row(static_cast<Eigen::Index>(i));
                                            });
        }
    });
    return out;
}

/// M_infer: composited softmax(decoder(s_G)) per pixel.
inline SemanticDistributionMap<double> render_semantic_distribution(const Scene& scene, const Camera& cam,
                                                                    const DecoderMLP& decoder,
                                                                    const RenderOptions& opts = {}) {
    if (!scene.empty() && scene.semantic_dim() != decoder.feature_dim()) {
        throw ValidationError("decoder input dimension does not match the scene semantic features");
    }
    RowMatrixXd payloads(static_cast<Eigen::Index>(scene.size()), decoder.num_indices());
    for (std::size_t i = 0; i < scene.size(); ++i) {
        payloads.row(static_cast<Eigen::Index>(i)) = decode(decoder, scene[i].semantic_feature).transpose();
    }
    return {cam.width, cam.height, render_payload(scene, cam, payloads, opts)};
}

/// Sparse compositing weights T_i a_i per pixel (CSR layout). With geometry frozen these are
/// constants, so any per-Gaussian payload renders as a weighted sum over them.
struct RayWeights {
    int width = 0;
    int height = 0;
    std::vector<std::size_t> offsets; // pixel_count + 1 entries
    std::vector<std::uint32_t> gaussian;
    std::vector<double> weight;

    std::size_t pixel_count() const { return offsets.empty() ? 0 : offsets.size() - 1; }
};

RayWeights ray_weights(const Scene& scene, const Camera& cam, const RenderOptions& opts = {});

} // namespace lesplat
