#include "lesplat/quantize.hpp"

#include "lesplat/errors.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace lesplat;

namespace {

RowMatrixXd random_units(int n, int dim, std::mt19937_64& rng) {
    RowMatrixXd m(n, dim);
    for (int i = 0; i < n; ++i) {
        m.row(i) = oracle::random_unit(dim, rng).transpose();
    }
    return m;
}

} // namespace

TEST(Codebook, RejectsNonUnitRowsAndEmpty) {
    EXPECT_THROW(Codebook(RowMatrixXd(0, 3)), ValidationError);
    EXPECT_THROW(Codebook(RowMatrixXd::Constant(2, 2, 1.0)), ValidationError);
    EXPECT_NO_THROW(Codebook(RowMatrixXd::Identity(3, 3)));
}

TEST(BuildCodebook, SingleCodewordIsNormalisedMean) {
    std::mt19937_64 rng(1);
    RowMatrixXd f = random_units(50, 6, rng);
    f.col(0).array() += 2.0; // bias the mean away from zero
    const Codebook cb = build_codebook(f, 1, 3);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(6);
    for (Eigen::Index i = 0; i < f.rows(); ++i) {
        mean += f.row(i).normalized().transpose();
    }
    EXPECT_LT((cb.entries().row(0).transpose() - mean.normalized()).norm(), 1e-12);
}

TEST(BuildCodebook, DistinctUnitFeaturesGiveZeroError) {
    std::mt19937_64 rng(2);
    const RowMatrixXd f = random_units(6, 10, rng);
    const Codebook cb = build_codebook(f, 6, 9);
    EXPECT_NEAR(quantization_error(f, cb), 0.0, 1e-12);
}

TEST(BuildCodebook, AssignmentsMatchExhaustiveNearest) {
    std::mt19937_64 rng(3);
    const RowMatrixXd f = random_units(1000, 12, rng);
    const Codebook cb = build_codebook(f, 8, 4);
    const std::vector<int> idx = assign(f, cb);
    for (Eigen::Index i = 0; i < f.rows(); ++i) {
        ASSERT_EQ(idx[static_cast<std::size_t>(i)], oracle::nearest(f.row(i).transpose(), cb.entries()));
    }
}

TEST(BuildCodebook, DeterministicPerSeed) {
    std::mt19937_64 rng(4);
    const RowMatrixXd f = random_units(300, 8, rng);
    EXPECT_EQ(build_codebook(f, 5, 1).entries(), build_codebook(f, 5, 1).entries());
}

TEST(BuildCodebook, RejectsBadInput) {
    std::mt19937_64 rng(5);
    RowMatrixXd f = random_units(4, 3, rng);
    EXPECT_THROW(build_codebook(f, 5, 0), ValidationError);
    EXPECT_THROW(build_codebook(f, 0, 0), ValidationError);
    f.row(2).setZero();
    EXPECT_THROW(build_codebook(f, 2, 0), ValidationError);
}

TEST(BuildCodebook, MoreCodewordsNeverWorseOverSeeds) {
    std::mt19937_64 rng(6);
    const RowMatrixXd f = random_units(400, 8, rng);
    double best16 = 1e9;
    double best4 = 1e9;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        best16 = std::min(best16, quantization_error(f, build_codebook(f, 16, seed)));
        best4 = std::min(best4, quantization_error(f, build_codebook(f, 4, seed)));
    }
    EXPECT_LE(best16, best4);
}

TEST(Assign, CodewordMapsToItself) {
    std::mt19937_64 rng(7);
    const Codebook cb(random_units(9, 5, rng));
    for (int j = 0; j < cb.size(); ++j) {
        EXPECT_EQ(assign(Eigen::VectorXd(cb.entries().row(j).transpose()), cb), j);
    }
}

TEST(Assign, TiesGoToTheLowestIndex) {
    RowMatrixXd rows = RowMatrixXd::Zero(6, 6);
    for (int j = 0; j < 6; ++j) {
        rows(j, j) = 1.0;
    }
    const Codebook cb(rows);
    Eigen::VectorXd f = Eigen::VectorXd::Zero(6);
    f[2] = f[5] = 1.0;
    EXPECT_EQ(assign(f, cb), 2);
}

TEST(Assign, RandomVectorsMatchBruteForce) {
    std::mt19937_64 rng(8);
    const Codebook cb(random_units(16, 7, rng));
    for (int i = 0; i < 1000; ++i) {
        const Eigen::VectorXd f = oracle::random_unit(7, rng) * 3.0;
        ASSERT_EQ(assign(f, cb), oracle::nearest(f, cb.entries()));
    }
}

TEST(Assign, RejectsZeroAndMismatchedVectors) {
    const Codebook cb(RowMatrixXd::Identity(3, 3));
    EXPECT_THROW(assign(Eigen::VectorXd(Eigen::VectorXd::Zero(3)), cb), ValidationError);
    EXPECT_THROW(assign(Eigen::VectorXd(Eigen::VectorXd::Ones(4)), cb), ValidationError);
}

TEST(QuantizationError, SubsetOfCodewordsIsZero) {
    const Codebook cb(RowMatrixXd::Identity(4, 4));
    EXPECT_EQ(quantization_error(RowMatrixXd::Identity(4, 4).topRows(2), cb), 0.0);
}

TEST(QuantizationError, OrthogonalFeatureIsOne) {
    const Codebook cb(RowMatrixXd::Identity(1, 2));
    RowMatrixXd f(1, 2);
    f << 0.0, 1.0;
    EXPECT_DOUBLE_EQ(quantization_error(f, cb), 1.0);
}

TEST(QuantizationError, HandComputedMean) {
    // Codewords e0, e1. -e0 is nearer e1 (cos 0) than e0 (cos -1), so it costs 1.
    RowMatrixXd rows = RowMatrixXd::Zero(2, 3);
    rows(0, 0) = 1.0;
    rows(1, 1) = 1.0;
    const Codebook cb(rows);
    RowMatrixXd f(4, 3);
    f << 1, 0, 0,
         0.5, 0, std::sqrt(3.0) / 2,
         -1, 0, 0,
         0, 1, 0;
    EXPECT_NEAR(quantization_error(f, cb), (0.0 + 0.5 + 1.0 + 0.0) / 4.0, 1e-15);
}
