#include "lesplat/mlp.hpp"
#include "lesplat/render.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace lesplat;

namespace {

Gaussian at(const Eigen::Vector3d& p, double opacity, const Eigen::Vector3d& color, double scale = 0.1) {
    Gaussian g;
    g.position = p;
    g.scale = Eigen::Vector3d::Constant(scale);
    g.opacity = opacity;
    g.color = color;
    g.semantic_feature = Eigen::VectorXd::Zero(2);
    return g;
}

// Decoder whose output logits are `bias` regardless of the input.
DecoderMLP constant_decoder(const Eigen::VectorXd& bias) {
    DecoderMLP d = DecoderMLP::zeros(2, static_cast<int>(bias.size()));
    d.net.b2 = bias;
    return d;
}

Eigen::VectorXd one_hot_logits(int k, int n) {
    Eigen::VectorXd v = Eigen::VectorXd::Constant(n, -60.0);
    v[k] = 60.0;
    return v;
}

} // namespace

TEST(Project, CullsAtTheNearPlane) {
    const Camera cam = oracle::test_camera();
    EXPECT_FALSE(project(at({0, 0, 0}, 1.0, {1, 1, 1}), cam).has_value());
    EXPECT_FALSE(project(at({0, 0, 0.01}, 1.0, {1, 1, 1}), cam).has_value());
    EXPECT_FALSE(project(at({0, 0, -2}, 1.0, {1, 1, 1}), cam).has_value());
    EXPECT_TRUE(project(at({0, 0, 0.0101}, 1.0, {1, 1, 1}), cam).has_value());
}

TEST(Project, OpticalAxisLandsOnPrincipalPoint) {
    const Camera cam = oracle::test_camera();
    const auto s = project(at({0, 0, 3.7}, 1.0, {1, 1, 1}), cam);
    ASSERT_TRUE(s);
    EXPECT_DOUBLE_EQ(s->mean2d.x(), cam.cx);
    EXPECT_DOUBLE_EQ(s->mean2d.y(), cam.cy);
    EXPECT_DOUBLE_EQ(s->depth, 3.7);
}

TEST(Project, IsotropicCovarianceMatchesHandJacobian) {
    Camera cam = oracle::test_camera();
    cam.fy = 20.0;
    const double sigma = 0.4;
    const double z = 2.5;
    const auto s = project(at({0, 0, z}, 1.0, {1, 1, 1}, sigma), cam);
    ASSERT_TRUE(s);
    const double ex = std::pow(cam.fx * sigma / z, 2) + 0.3;
    const double ey = std::pow(cam.fy * sigma / z, 2) + 0.3;
    EXPECT_NEAR(s->cov2d(0, 0), ex, 1e-12);
    EXPECT_NEAR(s->cov2d(1, 1), ey, 1e-12);
    EXPECT_NEAR(s->cov2d(0, 1), 0.0, 1e-12);
}

TEST(Composite, EmptyListIsZeroWithFullTransmittance) {
    const auto r = composite<double>(Eigen::VectorXd(0), RowMatrixXd(0, 3));
    EXPECT_EQ(r.value, Eigen::Vector3d::Zero());
    EXPECT_EQ(r.transmittance, 1.0);
}

TEST(Composite, OpaqueFront) {
    RowMatrixXd c(1, 3);
    c << 0.2, 0.4, 0.6;
    const auto r = composite<double>(Eigen::VectorXd::Constant(1, 1.0 - 1e-9), c);
    EXPECT_NEAR((r.value - c.row(0).transpose()).norm(), 0.0, 1e-9);
    EXPECT_NEAR(r.transmittance, 1e-9, 1e-15);
}

TEST(Composite, TwoHalfAlphas) {
    RowMatrixXd c(2, 2);
    c << 1.0, 0.0, 0.0, 1.0;
    const auto r = composite<double>(Eigen::Vector2d(0.5, 0.5), c);
    EXPECT_DOUBLE_EQ(r.value[0], 0.5);
    EXPECT_DOUBLE_EQ(r.value[1], 0.25);
    EXPECT_DOUBLE_EQ(r.transmittance, 0.25);
}

TEST(Composite, RejectsAlphaOutsideHalfOpenUnitInterval) {
    EXPECT_THROW(composite<double>(Eigen::VectorXd::Constant(1, 1.0), RowMatrixXd::Ones(1, 1)), ValidationError);
    EXPECT_THROW(composite<double>(Eigen::VectorXd::Constant(1, -0.1), RowMatrixXd::Ones(1, 1)), ValidationError);
    EXPECT_THROW(composite<double>(Eigen::VectorXd::Constant(2, 0.1), RowMatrixXd::Ones(1, 1)), ValidationError);
}

TEST(Composite, TransmittanceMonotoneAndWeightsBounded) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 0.999);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + trial % 40;
        double t = 1.0;
        double wsum = 0.0;
        for (int i = 0; i < n; ++i) {
            const double a = u(rng);
            const double w = t * a;
            ASSERT_GE(w, 0.0);
            wsum += w;
            const double next = t * (1.0 - a);
            ASSERT_LE(next, t);
            ASSERT_GT(next, 0.0);
            t = next;
        }
        Eigen::VectorXd alphas(n);
        std::mt19937_64 replay(rng());
        for (int i = 0; i < n; ++i) {
            alphas[i] = u(replay);
        }
        const auto r = composite<double>(alphas, RowMatrixXd::Ones(n, 1));
        EXPECT_LE(r.value[0], 1.0 + 1e-12);
        EXPECT_NEAR(r.value[0] + r.transmittance, 1.0, 1e-12);
        EXPECT_GT(r.transmittance, 0.0);
        EXPECT_LE(wsum, 1.0 + 1e-12);
    }
}

TEST(RenderColor, EmptySceneIsBackground) {
    const Scene s({}, Eigen::Vector3d(0.1, 0.2, 0.3));
    const auto img = render_color(s, oracle::test_camera());
    for (Eigen::Index p = 0; p < img.pixels.rows(); ++p) {
        EXPECT_EQ(img.pixels.row(p), Eigen::RowVector3d(0.1, 0.2, 0.3));
    }
}

TEST(RenderColor, LargeOpaqueGaussianCoversCentre) {
    // Alpha saturates at 0.99 per splat; five stacked copies leave 1e-10 transmittance.
    std::vector<Gaussian> gs;
    for (int i = 0; i < 5; ++i) {
        gs.push_back(at({0, 0, 2.0 + 0.1 * i}, 1.0, {0.9, 0.5, 0.1}, 1.0));
    }
    const Camera cam = oracle::test_camera();
    const auto img = render_color(Scene(gs, Eigen::Vector3d(0, 0, 1)), cam);
    const Eigen::Vector3d c = img.at(cam.width / 2, cam.height / 2);
    EXPECT_LT((c - Eigen::Vector3d(0.9, 0.5, 0.1)).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(RenderColor, FrontRedBackBlue) {
    // The pixel centre sits exactly on the splat means, so alpha equals the opacity.
    Camera cam = oracle::test_camera(1, 1);
    cam.cx = cam.cy = 0.5;
    const Scene s({at({0, 0, 3}, 0.5, {0, 0, 1}), at({0, 0, 2}, 0.5, {1, 0, 0})}, Eigen::Vector3d(0, 1, 0));
    const Eigen::Vector3d c = render_color(s, cam).at(0, 0);
    EXPECT_NEAR((c - Eigen::Vector3d(0.5, 0.25, 0.25)).norm(), 0.0, 1e-15);
}

TEST(RenderSemantic, EmptySceneIsAllZero) {
    const Scene s;
    const auto m = render_semantic_distribution(s, oracle::test_camera(), constant_decoder(Eigen::VectorXd::Zero(4)));
    EXPECT_EQ(m.probs.rows(), 16 * 12);
    EXPECT_EQ(m.probs.cols(), 4);
    EXPECT_EQ(m.probs.cwiseAbs().maxCoeff(), 0.0);
}

TEST(RenderSemantic, OpaqueOneHotIndexTwo) {
    std::vector<Gaussian> gs;
    for (int i = 0; i < 5; ++i) {
        gs.push_back(at({0, 0, 2.0 + 0.1 * i}, 1.0, {1, 1, 1}, 1.0));
    }
    const Camera cam = oracle::test_camera();
    const auto m = render_semantic_distribution(Scene(gs), cam, constant_decoder(one_hot_logits(2, 5)));
    Eigen::VectorXd e2 = Eigen::VectorXd::Zero(5);
    e2[2] = 1.0;
    EXPECT_LT((m.at(cam.width / 2, cam.height / 2) - e2).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(RenderSemantic, TwoGaussiansOneHotPayloads) {
    Camera cam = oracle::test_camera(1, 1);
    cam.cx = cam.cy = 0.5;
    const Scene s({at({0, 0, 2}, 0.5, {1, 1, 1}), at({0, 0, 3}, 0.5, {1, 1, 1})});
    RowMatrixXd payloads = RowMatrixXd::Zero(2, 4);
    payloads(0, 0) = 1.0;
    payloads(1, 1) = 1.0;
    const RowMatrixXd m = render_payload(s, cam, payloads);
    EXPECT_NEAR((m.row(0) - Eigen::RowVector4d(0.5, 0.25, 0, 0)).norm(), 0.0, 1e-15);
}

TEST(RenderSemantic, BackgroundMassIsNotRenormalised) {
    Camera cam = oracle::test_camera(1, 1);
    cam.cx = cam.cy = 0.5;
    const Scene s({at({0, 0, 2}, 0.4, {1, 1, 1})});
    const auto m = render_semantic_distribution(s, cam, constant_decoder(Eigen::VectorXd::Zero(4)));
    EXPECT_NEAR(m.probs.row(0).sum(), 0.4, 1e-15);
}

TEST(Render, MatchesBruteForceReference) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const Scene s = oracle::random_scene(rng, 1 + static_cast<int>(rng() % 100));
        const Camera cam = oracle::test_camera();
        const RowMatrixXd expected = oracle::render_color(s, cam);
        const auto img = render_color(s, cam);
        EXPECT_LT((img.pixels - expected).cwiseAbs().maxCoeff(), 1e-6) << "trial " << trial;

        const DecoderMLP dec = DecoderMLP::random(4, 6, trial);
        RowMatrixXd probs(static_cast<Eigen::Index>(s.size()), 6);
        for (std::size_t i = 0; i < s.size(); ++i) {
            probs.row(static_cast<Eigen::Index>(i)) = decode(dec, s[i].semantic_feature).transpose();
        }
        const RowMatrixXd m_expected = oracle::render(s, cam, probs).first;
        const auto m = render_semantic_distribution(s, cam, dec);
        EXPECT_LT((m.probs - m_expected).cwiseAbs().maxCoeff(), 1e-6) << "trial " << trial;
        EXPECT_LE(m.probs.rowwise().sum().maxCoeff(), 1.0 + 1e-12);
    }
}

TEST(Render, InvariantToGaussianOrder) {
    std::mt19937_64 rng(8);
    const Scene s = oracle::random_scene(rng, 40);
    std::vector<Gaussian> shuffled(s.gaussians().begin(), s.gaussians().end());
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const Scene t(shuffled, s.background_color());
    const Camera cam = oracle::test_camera();
    EXPECT_LT((render_color(s, cam).pixels - render_color(t, cam).pixels).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Render, EqualDepthTiesGoToTheLowerIndex) {
    Camera cam = oracle::test_camera(1, 1);
    cam.cx = cam.cy = 0.5;
    const Scene s({at({0, 0, 2}, 0.5, {1, 0, 0}), at({0, 0, 2}, 0.5, {0, 0, 1})});
    EXPECT_NEAR((render_color(s, cam).at(0, 0) - Eigen::Vector3d(0.5, 0, 0.25)).norm(), 0.0, 1e-15);
}

TEST(Render, ThreadCountDoesNotChangeOutput) {
    std::mt19937_64 rng(13);
    const Scene s = oracle::random_scene(rng, 60);
    const Camera cam = oracle::test_camera(33, 17);
    RenderOptions one;
    one.threads = 1;
    RenderOptions many;
    many.threads = 5;
    EXPECT_EQ(render_color(s, cam, one).pixels, render_color(s, cam, many).pixels);
}

TEST(RayWeights, ReproduceThePayloadRender) {
    std::mt19937_64 rng(17);
    const Scene s = oracle::random_scene(rng, 30);
    const Camera cam = oracle::test_camera();
    const RayWeights rw = ray_weights(s, cam);
    RowMatrixXd payloads = RowMatrixXd::Random(30, 3);
    RowMatrixXd via = RowMatrixXd::Zero(static_cast<Eigen::Index>(cam.pixel_count()), 3);
    for (std::size_t p = 0; p < rw.pixel_count(); ++p) {
        double sum = 0.0;
        for (std::size_t k = rw.offsets[p]; k < rw.offsets[p + 1]; ++k) {
            via.row(static_cast<Eigen::Index>(p)) += rw.weight[k] * payloads.row(rw.gaussian[k]);
            sum += rw.weight[k];
        }
        EXPECT_LE(sum, 1.0 + 1e-12);
    }
    EXPECT_LT((via - render_payload(s, cam, payloads)).cwiseAbs().maxCoeff(), 1e-12);
}
