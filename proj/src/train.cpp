#include "lesplat/train.hpp"

#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

namespace lesplat {

namespace {

constexpr double kProbabilityFloor = 1e-12;

struct Tape {
    VectorXd pre;    // w1 x + b1
    VectorXd hidden; // relu(pre)
    VectorXd out;
};

Tape forward_tape(const TwoLayerMlp& net, const VectorXd& x) {
    Tape t;
    t.pre = net.w1 * x + net.b1;
    t.hidden = t.pre.cwiseMax(0.0);
    t.out = net.w2 * t.hidden + net.b2;
    return t;
}

/// Accumulates parameter gradients into `grad`; returns d/dx.
VectorXd backward(const TwoLayerMlp& net, const VectorXd& x, const Tape& t, const VectorXd& d_out, TwoLayerMlp& grad) {
    grad.w2.noalias() += d_out * t.hidden.transpose();
    grad.b2 += d_out;
    const VectorXd d_hidden = (net.w2.transpose() * d_out).array() * (t.pre.array() > 0.0).cast<double>();
    grad.w1.noalias() += d_hidden * x.transpose();
    grad.b1 += d_hidden;
    return net.w1.transpose() * d_hidden;
}

TwoLayerMlp zeros_like(const TwoLayerMlp& net) {
    return TwoLayerMlp::zeros(net.input_dim(), net.hidden_dim(), net.output_dim());
}

void check_unit_interval(const VectorXd& u) {
    if (!((u.array() >= 0.0).all() && (u.array() <= 1.0).all())) {
        throw ValidationError("uncertainty values must lie in [0,1]");
    }
}

} // namespace

void validate(const TrainConfig& cfg) {
    if (cfg.lambda_s < 0 || cfg.lambda_ce < 0 || cfg.lambda_u < 0 || cfg.lambda_smo < 0) {
        throw ValidationError("loss weights must be non-negative");
    }
    if (!(cfg.w_s > 0.0 && cfg.w_s <= 1.0)) {
        throw ValidationError("w_s must lie in (0,1]");
    }
    if (!(cfg.learning_rate > 0.0) || cfg.epochs < 0) {
        throw ValidationError("learning rate must be positive and epochs non-negative");
    }
    if (cfg.num_indices < 1) {
        throw ValidationError("number of semantic indices must be at least 1");
    }
    if (!(cfg.init_uncertainty >= 0.0 && cfg.init_uncertainty <= 1.0)) {
        throw ValidationError("initial uncertainty must lie in [0,1]");
    }
}

// ---------------------------------------------------------------------------

double loss_ce(const RowMatrixXd& pred, std::span<const int> target, const VectorXd& u) {
    if (pred.rows() != static_cast<Eigen::Index>(target.size()) || u.size() != pred.rows()) {
        throw ValidationError("loss_ce: pred, target and u must have one entry per sample");
    }
    if (pred.rows() == 0) {
        throw ValidationError("loss_ce: no samples");
    }
    check_unit_interval(u);
    double total = 0.0;
    for (Eigen::Index i = 0; i < pred.rows(); ++i) {
        const int t = target[static_cast<std::size_t>(i)];
        if (t < 0 || t >= pred.cols()) {
            throw ValidationError("loss_ce: target index out of range");
        }
        total += (1.0 - u[i]) * -std::log(std::max(pred(i, t), kProbabilityFloor));
    }
    return total / static_cast<double>(pred.rows());
}

CeGradient loss_ce_gradient(const RowMatrixXd& pred, std::span<const int> target, const VectorXd& u) {
    const double value = loss_ce(pred, target, u); // validates
    (void)value;
    const double scale = 1.0 / static_cast<double>(pred.rows());
    CeGradient g{RowMatrixXd::Zero(pred.rows(), pred.cols()), VectorXd::Zero(u.size())};
    for (Eigen::Index i = 0; i < pred.rows(); ++i) {
        const int t = target[static_cast<std::size_t>(i)];
        const double p = pred(i, t);
        if (p > kProbabilityFloor) {
            g.pred(i, t) = -scale * (1.0 - u[i]) / p;
        }
        g.u[i] = scale * std::log(std::max(p, kProbabilityFloor));
    }
    return g;
}

double loss_uncertainty(const VectorXd& u) {
    if (u.size() == 0) {
        throw ValidationError("loss_uncertainty: empty input");
    }
    check_unit_interval(u);
    return u.mean();
}

SmoothingTerms smoothing_terms(const RowMatrixXd& s_mlp, const RowMatrixXd& s_g, const VectorXd& u_g, double w_s,
                               const RowMatrixXd* frozen_s_mlp, const RowMatrixXd* frozen_s_g) {
    if (s_mlp.rows() != s_g.rows() || s_mlp.cols() != s_g.cols() || u_g.size() != s_g.rows()) {
        throw ValidationError("loss_smoothing: dimension mismatch");
    }
    const RowMatrixXd& sg_mlp = frozen_s_mlp ? *frozen_s_mlp : s_mlp;
    const RowMatrixXd& sg_g = frozen_s_g ? *frozen_s_g : s_g;
    SmoothingTerms out;
    const Eigen::Index n = s_g.rows();
    if (n == 0) {
        out.grad_s_mlp = s_mlp;
        out.grad_s_g = s_g;
        return out;
    }
    const VectorXd weight = u_g.cwiseMax(w_s);
    const RowMatrixXd pull_mlp = s_mlp - sg_g;
    const RowMatrixXd pull_g = sg_mlp - s_g;
    out.toward_gaussian = pull_mlp.rowwise().squaredNorm().sum() / static_cast<double>(n);
    out.toward_mlp = weight.dot(pull_g.rowwise().squaredNorm()) / static_cast<double>(n);
    out.grad_s_mlp = (2.0 / static_cast<double>(n)) * pull_mlp;
    out.grad_s_g = (-2.0 / static_cast<double>(n)) * (weight.asDiagonal() * pull_g);
    return out;
}

double loss_smoothing(const RowMatrixXd& s_mlp, const RowMatrixXd& s_g, const VectorXd& u_g, double w_s) {
    return smoothing_terms(s_mlp, s_g, u_g, w_s).value();
}

double total_loss(const LossParts& parts, const TrainConfig& cfg) {
    return cfg.lambda_s * (cfg.lambda_ce * parts.ce + cfg.lambda_u * parts.u) + cfg.lambda_smo * parts.smo;
}

// ---------------------------------------------------------------------------

Eigen::Index SemanticParams::size() const {
    return features.size() + uncertainty.size() + decoder.net.parameter_count() + smoother.net.parameter_count();
}

VectorXd SemanticParams::flatten() const {
    VectorXd flat(size());
    Eigen::Index at = 0;
    flat.segment(at, features.size()) = features.reshaped<Eigen::RowMajor>();
    at += features.size();
    flat.segment(at, uncertainty.size()) = uncertainty;
    at += uncertainty.size();
    const VectorXd dec = decoder.net.flatten();
    flat.segment(at, dec.size()) = dec;
    at += dec.size();
    flat.segment(at, smoother.net.parameter_count()) = smoother.net.flatten();
    return flat;
}

void SemanticParams::unflatten(const VectorXd& flat) {
    if (flat.size() != size()) {
        throw ValidationError("parameter vector length does not match");
    }
    Eigen::Index at = 0;
    features.reshaped<Eigen::RowMajor>() = flat.segment(at, features.size());
    at += features.size();
    uncertainty = flat.segment(at, uncertainty.size());
    at += uncertainty.size();
    const Eigen::Index nd = decoder.net.parameter_count();
    decoder.net.unflatten(flat.segment(at, nd));
    at += nd;
    smoother.net.unflatten(flat.segment(at, smoother.net.parameter_count()));
}

SemanticObjective::SemanticObjective(const Scene& scene, std::span<const TrainView> views, const TrainConfig& cfg)
    : cfg_(cfg), coverage_(VectorXd::Zero(static_cast<Eigen::Index>(scene.size()))) {
    validate(cfg_);
    for (const auto& g : scene.gaussians()) {
        encoded_positions_.push_back(positional_encoding(g.position));
    }
    RenderOptions opts;
    opts.min_alpha = cfg_.min_alpha;
    for (const auto& view : views) {
        if (view.target.size() != view.camera.pixel_count()) {
            throw ValidationError("target map size does not match its camera");
        }
        const RayWeights rw = ray_weights(scene, view.camera, opts);
        for (std::size_t px = 0; px < rw.pixel_count(); ++px) {
            const int t = view.target[px];
            if (t < -1 || t >= cfg_.num_indices) {
                throw ValidationError("target index " + std::to_string(t) + " outside [-1, K)");
            }
            // Pixels nothing projects onto carry no gradient and are left out of the mean.
            if (t < 0 || rw.offsets[px] == rw.offsets[px + 1]) {
                continue;
            }
            Sample s{gaussian_.size(), 0, t};
            for (std::size_t k = rw.offsets[px]; k < rw.offsets[px + 1]; ++k) {
                gaussian_.push_back(rw.gaussian[k]);
                weight_.push_back(rw.weight[k]);
                coverage_[rw.gaussian[k]] += rw.weight[k];
            }
            s.end = gaussian_.size();
            samples_.push_back(s);
        }
    }
    supervised_pixels_ = samples_.size();
    if (samples_.empty()) {
        throw ValidationError("no gaussian is visible on any supervised pixel");
    }
}

SemanticObjective::Evaluation SemanticObjective::evaluate(const SemanticParams& live, const SemanticParams* frozen) const {
    const SemanticParams& sg = frozen ? *frozen : live;
    const Eigen::Index n = live.features.rows();
    if (n != static_cast<Eigen::Index>(encoded_positions_.size()) || live.uncertainty.size() != n ||
        live.decoder.num_indices() != cfg_.num_indices) {
        throw ValidationError("semantic parameters do not match the objective");
    }

    Evaluation ev;
    ev.gradient.features = RowMatrixXd::Zero(n, live.features.cols());
    ev.gradient.uncertainty = VectorXd::Zero(n);
    ev.gradient.decoder.net = zeros_like(live.decoder.net);
    ev.gradient.smoother.net = zeros_like(live.smoother.net);

    // Decoder forward per Gaussian.
    std::vector<Tape> dec_tapes;
    dec_tapes.reserve(static_cast<std::size_t>(n));
    RowMatrixXd probs(n, cfg_.num_indices);
    for (Eigen::Index i = 0; i < n; ++i) {
        dec_tapes.push_back(forward_tape(live.decoder.net, live.features.row(i).transpose()));
        probs.row(i) = softmax(dec_tapes.back().out).transpose();
    }

    // Cross entropy on composited distributions, u-weighted by the composited uncertainty.
    RowMatrixXd d_probs = RowMatrixXd::Zero(n, cfg_.num_indices);
    const double inv_count = 1.0 / static_cast<double>(samples_.size());
    const double ce_scale = cfg_.lambda_s * cfg_.lambda_ce * inv_count;
    double ce = 0.0;
    for (const auto& s : samples_) {
        double p = 0.0;
        double u_ray = 0.0;
        for (std::size_t k = s.begin; k < s.end; ++k) {
            p += weight_[k] * probs(gaussian_[k], s.target);
            u_ray += weight_[k] * live.uncertainty[gaussian_[k]];
        }
        const double nll = -std::log(std::max(p, kProbabilityFloor));
        ce += (1.0 - u_ray) * nll;
        const double d_p = p > kProbabilityFloor ? -ce_scale * (1.0 - u_ray) / p : 0.0;
        const double d_u = -ce_scale * nll;
        for (std::size_t k = s.begin; k < s.end; ++k) {
            d_probs(gaussian_[k], s.target) += weight_[k] * d_p;
            ev.gradient.uncertainty[gaussian_[k]] += weight_[k] * d_u;
        }
    }
    ev.parts.ce = ce * inv_count;

    for (Eigen::Index i = 0; i < n; ++i) {
        const VectorXd p = probs.row(i).transpose();
        const VectorXd g = d_probs.row(i).transpose();
        const VectorXd d_logits = p.cwiseProduct((g.array() - g.dot(p)).matrix());
        ev.gradient.features.row(i) +=
            backward(live.decoder.net, live.features.row(i).transpose(), dec_tapes[static_cast<std::size_t>(i)],
                     d_logits, ev.gradient.decoder.net).transpose();
    }

    // Uncertainty regulariser.
    ev.parts.u = live.uncertainty.mean();
    ev.gradient.uncertainty.array() += cfg_.lambda_s * cfg_.lambda_u / static_cast<double>(n);

    // Adaptive smoothing with stop-gradients.
    std::vector<Tape> smo_tapes;
    smo_tapes.reserve(static_cast<std::size_t>(n));
    RowMatrixXd s_mlp(n, live.features.cols());
    RowMatrixXd s_mlp_frozen(n, live.features.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        const VectorXd& x = encoded_positions_[static_cast<std::size_t>(i)];
        smo_tapes.push_back(forward_tape(live.smoother.net, x));
        s_mlp.row(i) = smo_tapes.back().out.transpose();
        if (frozen) {
            s_mlp_frozen.row(i) = sg.smoother.net.forward(x).transpose();
        } else {
            s_mlp_frozen.row(i) = s_mlp.row(i);
        }
    }
    const SmoothingTerms smo =
        smoothing_terms(s_mlp, live.features, sg.uncertainty, cfg_.w_s, &s_mlp_frozen, &sg.features);
    ev.parts.smo = smo.value();
    ev.gradient.features += cfg_.lambda_smo * smo.grad_s_g;
    for (Eigen::Index i = 0; i < n; ++i) {
        backward(live.smoother.net, encoded_positions_[static_cast<std::size_t>(i)], smo_tapes[static_cast<std::size_t>(i)],
                 cfg_.lambda_smo * smo.grad_s_mlp.row(i).transpose(), ev.gradient.smoother.net);
    }

    ev.total = total_loss(ev.parts, cfg_);
    return ev;
}

SemanticParams initial_params(const Scene& scene, const TrainConfig& cfg) {
    validate(cfg);
    const int d_c = scene.semantic_dim();
    if (d_c < 1) {
        throw ValidationError("scene has no semantic feature dimension");
    }
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, cfg.init_feature_std);
    SemanticParams p;
    p.features = RowMatrixXd(static_cast<Eigen::Index>(scene.size()), d_c);
    for (Eigen::Index i = 0; i < p.features.size(); ++i) {
        p.features.data()[i] = normal(rng);
    }
    p.uncertainty = VectorXd::Constant(static_cast<Eigen::Index>(scene.size()), cfg.init_uncertainty);
    p.decoder = DecoderMLP::random(d_c, cfg.num_indices, cfg.seed + 1);
    p.smoother = SmoothingMLP::random(d_c, cfg.seed + 2);
    return p;
}

TrainResult train_semantics(const Scene& scene, std::span<const TrainView> views, const TrainConfig& cfg) {
    const SemanticObjective objective(scene, views, cfg);
    SemanticParams params = initial_params(scene, cfg);
    VectorXd theta = params.flatten();

    const Eigen::Index n = params.features.rows();
    const Eigen::Index u_begin = params.features.size();

    constexpr double beta1 = 0.9;
    constexpr double beta2 = 0.999;
    constexpr double adam_eps = 1e-8;
    VectorXd m = VectorXd::Zero(theta.size());
    VectorXd v = VectorXd::Zero(theta.size());

    TrainResult result;
    result.trace.reserve(static_cast<std::size_t>(cfg.epochs));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        params.unflatten(theta);
        const auto ev = objective.evaluate(params);
        result.trace.push_back({epoch, ev.parts, ev.total});
        const VectorXd grad = ev.gradient.flatten();
        if (cfg.optimizer == Optimizer::Adam) {
            m = beta1 * m + (1.0 - beta1) * grad;
            v = beta2 * v + (1.0 - beta2) * grad.cwiseAbs2();
            const double c1 = 1.0 - std::pow(beta1, epoch + 1);
            const double c2 = 1.0 - std::pow(beta2, epoch + 1);
            theta.array() -= cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + adam_eps);
        } else {
            theta -= cfg.learning_rate * grad;
        }
        // Projected step keeps u in [0,1].
        theta.segment(u_begin, n) = theta.segment(u_begin, n).cwiseMax(0.0).cwiseMin(1.0);
    }
    params.unflatten(theta);
    if (!theta.allFinite()) {
        throw ValidationError("training diverged (non-finite parameters)");
    }
    result.scene = scene.with_semantics(params.features, params.uncertainty);
    result.decoder = params.decoder;
    result.smoother = params.smoother;
    return result;
}

std::string loss_trace_csv(std::span<const LossRecord> trace) {
    std::ostringstream out;
    out << "epoch,L_CE,L_u,L_smo,total\n";
    out << std::setprecision(17);
    for (const auto& r : trace) {
        out << r.epoch << ',' << r.parts.ce << ',' << r.parts.u << ',' << r.parts.smo << ',' << r.total << '\n';
    }
    return out.str();
}

double finite_diff_check(const std::function<double(const VectorXd&)>& loss, const VectorXd& analytic_gradient,
                         const VectorXd& params, double eps) {
    if (analytic_gradient.size() != params.size()) {
        throw ValidationError("finite_diff_check: gradient and parameter sizes differ");
    }
    double worst = 0.0;
    VectorXd probe = params;
    for (Eigen::Index i = 0; i < params.size(); ++i) {
        probe[i] = params[i] + eps;
        const double up = loss(probe);
        probe[i] = params[i] - eps;
        const double down = loss(probe);
        probe[i] = params[i];
        const double fd = (up - down) / (2.0 * eps);
        const double ga = analytic_gradient[i];
        worst = std::max(worst, std::abs(ga - fd) / std::max(1e-8, std::abs(ga) + std::abs(fd)));
    }
    return worst;
}

} // namespace lesplat
