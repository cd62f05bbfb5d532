#include "lesplat/scene.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <map>
#include <numbers>

using namespace lesplat;

namespace {

Gaussian unit_gaussian() {
    Gaussian g;
    g.semantic_feature = Eigen::VectorXd::Zero(8);
    return g;
}

SyntheticSceneSpec three_classes(std::uint64_t seed) {
    SyntheticSceneSpec spec;
    spec.seed = seed;
    spec.noise = 0.2;
    for (int c = 0; c < 3; ++c) {
        SyntheticClass cls;
        cls.name = "class" + std::to_string(c);
        cls.center = Eigen::Vector3d(c * 2.0, 0.0, 4.0);
        cls.half_extent = Eigen::Vector3d(0.5, 0.5, 0.2);
        cls.count = 50;
        spec.classes.push_back(cls);
    }
    return spec;
}

} // namespace

TEST(Covariance, IdentityRotationUnitScale) {
    const Gaussian g = unit_gaussian();
    EXPECT_TRUE(covariance(g).isApprox(Eigen::Matrix3d::Identity(), 1e-15));
}

TEST(Covariance, AxisAlignedScale) {
    Gaussian g = unit_gaussian();
    g.scale = Eigen::Vector3d(2, 1, 1);
    EXPECT_TRUE(covariance(g).isApprox(Eigen::Vector3d(4, 1, 1).asDiagonal().toDenseMatrix(), 1e-15));
}

TEST(Covariance, QuarterTurnAboutZSwapsAxes) {
    Gaussian g = unit_gaussian();
    g.scale = Eigen::Vector3d(2, 1, 1);
    g.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(std::numbers::pi / 2, Eigen::Vector3d::UnitZ()));
    const Eigen::Matrix3d expected = Eigen::Vector3d(1, 4, 1).asDiagonal();
    EXPECT_LT((covariance(g) - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Covariance, EigenvaluesAreSquaredScalesForAnyRotation) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.01, 3.0);
    for (int trial = 0; trial < 200; ++trial) {
        Gaussian g = unit_gaussian();
        g.scale = Eigen::Vector3d(u(rng), u(rng), u(rng));
        g.rotation = Eigen::Quaterniond(oracle::random_unit(4, rng).data());
        g.rotation.normalize();
        const Eigen::Matrix3d sigma = covariance(g);
        ASSERT_EQ((sigma - sigma.transpose()).norm(), 0.0);
        Eigen::Vector3d ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(sigma).eigenvalues();
        Eigen::Vector3d s2 = g.scale.array().square();
        std::sort(ev.data(), ev.data() + 3);
        std::sort(s2.data(), s2.data() + 3);
        EXPECT_LT((ev - s2).cwiseAbs().maxCoeff(), 1e-9 * std::max(1.0, s2.maxCoeff()));
    }
}

TEST(GaussianValidation, RejectsOutOfRangeFields) {
    Gaussian g = unit_gaussian();
    EXPECT_NO_THROW(validate(g));

    Gaussian bad = g;
    bad.rotation = Eigen::Quaterniond(1.0, 0.0, 0.0, 1e-4);
    EXPECT_THROW(validate(bad), ValidationError);
    bad = g;
    bad.scale.x() = 0.0;
    EXPECT_THROW(validate(bad), ValidationError);
    bad = g;
    bad.opacity = 1.5;
    EXPECT_THROW(validate(bad), ValidationError);
    bad = g;
    bad.uncertainty = -0.1;
    EXPECT_THROW(validate(bad), ValidationError);
    bad = g;
    bad.color.z() = 1.01;
    EXPECT_THROW(validate(bad), ValidationError);
}

TEST(GaussianValidation, QuaternionToleranceIsOneInABillion) {
    Gaussian g = unit_gaussian();
    g.rotation = Eigen::Quaterniond(1.0 + 5e-10, 0.0, 0.0, 0.0);
    EXPECT_NO_THROW(validate(g));
    g.rotation = Eigen::Quaterniond(1.0 + 5e-9, 0.0, 0.0, 0.0);
    EXPECT_THROW(validate(g), ValidationError);
}

TEST(SceneType, RejectsMixedSemanticDims) {
    Gaussian a = unit_gaussian();
    Gaussian b = unit_gaussian();
    b.semantic_feature = Eigen::VectorXd::Zero(4);
    EXPECT_THROW(Scene({a, b}), ValidationError);
}

TEST(SceneType, WithSemanticsKeepsGeometry) {
    std::mt19937_64 rng(2);
    const Scene s = oracle::random_scene(rng, 5);
    const RowMatrixXd f = RowMatrixXd::Constant(5, 4, 0.25);
    const Eigen::VectorXd u = Eigen::VectorXd::Constant(5, 0.75);
    const Scene t = s.with_semantics(f, u);
    for (std::size_t i = 0; i < s.size(); ++i) {
        EXPECT_EQ(t[i].position, s[i].position);
        EXPECT_EQ(t[i].scale, s[i].scale);
        EXPECT_EQ(t[i].semantic_feature, f.row(static_cast<Eigen::Index>(i)).transpose());
        EXPECT_EQ(t[i].uncertainty, 0.75);
    }
    EXPECT_THROW(s.with_semantics(f.topRows(4), u), ValidationError);
}

TEST(CameraType, LookAtPutsTargetOnOpticalAxis) {
    const Camera cam = look_at(Eigen::Vector3d(1, 2, -3), Eigen::Vector3d(0, 0, 1), Eigen::Vector3d(0, -1, 0), 32, 24, 60.0);
    EXPECT_NO_THROW(validate(cam));
    const Eigen::Vector3d p = cam.to_camera(Eigen::Vector3d(0, 0, 1));
    EXPECT_NEAR(p.x(), 0.0, 1e-12);
    EXPECT_NEAR(p.y(), 0.0, 1e-12);
    EXPECT_NEAR(p.z(), std::sqrt(1 + 4 + 16), 1e-12);
    EXPECT_NEAR(cam.fx, 16.0 / std::tan(std::numbers::pi / 6), 1e-9);
}

TEST(CameraType, RejectsImproperRotation) {
    Camera cam = oracle::test_camera();
    cam.rotation(0, 0) = -1.0;
    EXPECT_THROW(validate(cam), ValidationError);
    cam = oracle::test_camera();
    cam.width = 0;
    EXPECT_THROW(validate(cam), ValidationError);
}

TEST(SyntheticScene, SingleGaussianSitsAtRegionCentre) {
    SyntheticSceneSpec spec;
    SyntheticClass cls;
    cls.name = "only";
    cls.center = Eigen::Vector3d(0.5, -1.0, 3.0);
    cls.count = 1;
    spec.classes.push_back(cls);
    const LabeledScene ls = make_synthetic_scene(spec);
    ASSERT_EQ(ls.scene.size(), 1u);
    EXPECT_EQ(ls.scene[0].position, cls.center);
    EXPECT_EQ(ls.labels, std::vector<int>{0});
}

TEST(SyntheticScene, SameSeedIsBitIdentical) {
    const LabeledScene a = make_synthetic_scene(three_classes(5));
    const LabeledScene b = make_synthetic_scene(three_classes(5));
    EXPECT_EQ(scene_to_json(a.scene), scene_to_json(b.scene));
    EXPECT_EQ(a.labels, b.labels);
    const LabeledScene c = make_synthetic_scene(three_classes(6));
    EXPECT_NE(scene_to_json(a.scene), scene_to_json(c.scene));
}

TEST(SyntheticScene, ThreeClassesOfFifty) {
    const LabeledScene ls = make_synthetic_scene(three_classes(1));
    ASSERT_EQ(ls.scene.size(), 150u);
    std::map<int, int> hist;
    for (int l : ls.labels) {
        ++hist[l];
    }
    EXPECT_EQ(hist, (std::map<int, int>{{0, 50}, {1, 50}, {2, 50}}));
    EXPECT_EQ(ls.class_names, (std::vector<std::string>{"class0", "class1", "class2"}));
}

TEST(SyntheticScene, RejectsBadSpecs) {
    SyntheticSceneSpec spec = three_classes(1);
    spec.classes[1].count = 0;
    EXPECT_THROW(make_synthetic_scene(spec), ValidationError);
    spec = three_classes(1);
    spec.classes.clear();
    EXPECT_THROW(make_synthetic_scene(spec), ValidationError);
    spec = three_classes(1);
    spec.noise = -1.0;
    EXPECT_THROW(make_synthetic_scene(spec), ValidationError);
}

TEST(SceneJson, RoundTripsExactly) {
    std::mt19937_64 rng(3);
    const Scene s = oracle::random_scene(rng, 12, 8);
    const Scene t = scene_from_json(scene_to_json(s));
    ASSERT_EQ(t.size(), s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        EXPECT_EQ(t[i].position, s[i].position);
        EXPECT_EQ(t[i].scale, s[i].scale);
        EXPECT_EQ(t[i].rotation.coeffs(), s[i].rotation.coeffs());
        EXPECT_EQ(t[i].opacity, s[i].opacity);
        EXPECT_EQ(t[i].color, s[i].color);
        EXPECT_EQ(t[i].semantic_feature, s[i].semantic_feature);
        EXPECT_EQ(t[i].uncertainty, s[i].uncertainty);
    }
    EXPECT_EQ(t.background_color(), s.background_color());
}

TEST(SceneJson, CameraRoundTrips) {
    const Camera cam = look_at(Eigen::Vector3d(0.3, 0.1, -2), Eigen::Vector3d::Zero(), Eigen::Vector3d(0, -1, 0), 20, 10, 45.0);
    const Camera back = camera_from_json(camera_to_json(cam));
    EXPECT_EQ(back.rotation, cam.rotation);
    EXPECT_EQ(back.translation, cam.translation);
    EXPECT_EQ(back.fx, cam.fx);
    EXPECT_EQ(back.width, cam.width);
}

TEST(SceneJson, MalformedInputRaisesTypedErrors) {
    EXPECT_THROW(scene_from_json("{"), ParseError);
    EXPECT_THROW(scene_from_json("[]"), ParseError);
    EXPECT_THROW(scene_from_json(R"({"version":2,"background_color":[0,0,0],"gaussians":[]})"), ParseError);
    EXPECT_THROW(camera_from_json(R"({"fx":1,"fy":1,"cx":0,"cy":0,"width":1e300,"height":1,
        "rotation":[[1,0,0],[0,1,0],[0,0,1]],"translation":[0,0,0]})"), ParseError);
    EXPECT_THROW(synthetic_spec_from_json(R"({"classes":[{"name":"a","center":[0,0,0],"half_extent":[1,1,1],"count":1,"scale":"big"}]})"),
                 ParseError);
}

TEST(SceneJson, SyntheticSpecFromJson) {
    const SyntheticSceneSpec spec = synthetic_spec_from_json(R"({
        "seed": 9, "noise": 0.1,
        "classes": [{"name": "car", "center": [0, 0, 4], "half_extent": [1, 1, 1], "count": 3}]
    })");
    EXPECT_EQ(spec.seed, 9u);
    ASSERT_EQ(spec.classes.size(), 1u);
    EXPECT_EQ(spec.classes[0].count, 3);
    EXPECT_EQ(make_synthetic_scene(spec).scene.size(), 3u);
}
