#pragma once

#include "lesplat/mlp.hpp"
#include "lesplat/render.hpp"
#include "lesplat/scene.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lesplat {

enum class Optimizer { GradientDescent, Adam };

struct TrainConfig {
    double lambda_s = 0.5;
    double lambda_ce = 0.1;
    double lambda_u = 0.1;
    double lambda_smo = 0.1;
    double w_s = 0.1;             // minimal smoothing weight
    double learning_rate = 0.05;
    int epochs = 500;
    std::uint64_t seed = 0;
    Optimizer optimizer = Optimizer::Adam;
    int num_indices = 0;          // decoder output size K; must match the targets
    double init_feature_std = 0.01;
    double init_uncertainty = 0.1;
    /// Splats below this alpha are dropped from the training ray lists.
    double min_alpha = 1.0 / 255.0;
};

void validate(const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Loss terms

/// Mean over samples of (1 - u) * -log(pred[target]); pred[target] is floored at 1e-12.
double loss_ce(const RowMatrixXd& pred, std::span<const int> target, const VectorXd& u);

struct CeGradient {
    RowMatrixXd pred;
    VectorXd u;
};
CeGradient loss_ce_gradient(const RowMatrixXd& pred, std::span<const int> target, const VectorXd& u);

/// mean(u).
double loss_uncertainty(const VectorXd& u);

/// The two halves of the smoothing loss, kept apart so stop-gradient can be checked per term.
/// toward_gaussian = mean |s_mlp - sg(s_g)|^2 pulls the MLP toward the Gaussians;
/// toward_mlp = mean max(sg(u), w_s) |sg(s_mlp) - s_g|^2 pulls the Gaussians toward the MLP.
struct SmoothingTerms {
    double toward_gaussian = 0.0;
    double toward_mlp = 0.0;
    RowMatrixXd grad_s_mlp; // d(toward_gaussian)/d s_mlp; toward_mlp contributes nothing
    RowMatrixXd grad_s_g;   // d(toward_mlp)/d s_g; toward_gaussian contributes nothing

    double value() const { return toward_gaussian + toward_mlp; }
};

/// Stop-gradient arguments may be given separately (frozen_*) so a finite-difference probe can
/// move the live values while the detached copies stay put. They default to the live values.
SmoothingTerms smoothing_terms(const RowMatrixXd& s_mlp, const RowMatrixXd& s_g, const VectorXd& u_g, double w_s,
                               const RowMatrixXd* frozen_s_mlp = nullptr, const RowMatrixXd* frozen_s_g = nullptr);

double loss_smoothing(const RowMatrixXd& s_mlp, const RowMatrixXd& s_g, const VectorXd& u_g, double w_s);

struct LossParts {
    double ce = 0.0;
    double u = 0.0;
    double smo = 0.0;
};

/// lambda_s (lambda_ce L_ce + lambda_u L_u) + lambda_smo L_smo
double total_loss(const LossParts& parts, const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Objective over per-Gaussian semantics and both MLPs (geometry fixed)

struct SemanticParams {
    RowMatrixXd features; // N x d_c, the s_G
    VectorXd uncertainty; // N, the u_G
    DecoderMLP decoder;
    SmoothingMLP smoother;

    Eigen::Index size() const;
    VectorXd flatten() const;
    void unflatten(const VectorXd& flat);
};

/// One training view: a camera and a per-pixel target index (-1 = no target).
struct TrainView {
    Camera camera;
    std::vector<int> target;
};

class SemanticObjective {
public:
    SemanticObjective(const Scene& scene, std::span<const TrainView> views, const TrainConfig& cfg);

    struct Evaluation {
        LossParts parts;
        double total = 0.0;
        SemanticParams gradient;
    };

    /// Loss and its analytic gradient at `live`. Stop-gradient inputs are read from `frozen`
    /// when given, otherwise from `live`.
    Evaluation evaluate(const SemanticParams& live, const SemanticParams* frozen = nullptr) const;

    std::size_t supervised_pixels() const { return supervised_pixels_; }
    /// Total compositing weight each Gaussian receives over supervised pixels.
    const VectorXd& coverage() const { return coverage_; }
    const TrainConfig& config() const { return cfg_; }

private:
    struct Sample {
        std::size_t begin, end; // range into gaussian_/weight_
        int target;
    };

    TrainConfig cfg_;
    std::vector<VectorXd> encoded_positions_;
    std::vector<Sample> samples_;
    std::vector<std::uint32_t> gaussian_;
    std::vector<double> weight_;
    std::size_t supervised_pixels_ = 0;
    VectorXd coverage_;
};

SemanticParams initial_params(const Scene& scene, const TrainConfig& cfg);

struct LossRecord {
    int epoch = 0;
    LossParts parts;
    double total = 0.0;
};

struct TrainResult {
    Scene scene;
    DecoderMLP decoder;
    SmoothingMLP smoother;
    std::vector<LossRecord> trace;
};

/// Full-batch optimisation of s_G, u_G, decoder and smoother. One record per epoch, taken
/// before that epoch's update. Deterministic for a fixed seed.
TrainResult train_semantics(const Scene& scene, std::span<const TrainView> views, const TrainConfig& cfg);

std::string loss_trace_csv(std::span<const LossRecord> trace);

/// Central differences: max over parameters of |g_a - g_fd| / max(1e-8, |g_a| + |g_fd|).
double finite_diff_check(const std::function<double(const VectorXd&)>& loss, const VectorXd& analytic_gradient,
                         const VectorXd& params, double eps = 1e-4);

} // namespace lesplat
