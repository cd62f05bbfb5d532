#include "lesplat/io.hpp"

#include "lesplat/errors.hpp"
#include "fuzz.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <limits>

using namespace lesplat;

namespace {

Grid random_grid(std::mt19937_64& rng, std::uint32_t h, std::uint32_t w, std::uint32_t d) {
    std::normal_distribution<float> n(0.0f, 3.0f);
    Grid g{h, w, d, {}};
    g.data.resize(g.element_count());
    for (float& v : g.data) v = n(rng);
    return g;
}

EmbeddingTable random_table(std::mt19937_64& rng, int phrases, int dim) {
    EmbeddingTable t(dim, Provenance::Synthetic);
    for (int i = 0; i < phrases; ++i) {
        t.add("phrase " + std::to_string(i), oracle::random_unit(dim, rng));
    }
    return t;
}

FormatErrorCode legf_error(const std::vector<std::uint8_t>& bytes) {
    try {
        read_legf(bytes);
    } catch (const FormatError& e) {
        return e.code();
    }
    ADD_FAILURE() << "no FormatError";
    return FormatErrorCode::BadHeader;
}

} // namespace

TEST(Legf, SingleZeroCell) {
    const std::vector<std::uint8_t> bytes = write_legf(Grid{1, 1, 1, {0.0f}});
    ASSERT_EQ(bytes.size(), 24u);
    const std::uint8_t header[] = {'L', 'E', 'G', 'F', 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0};
    EXPECT_EQ(std::memcmp(bytes.data(), header, 24), 0);
}

TEST(Legf, HeaderFieldOrderIsHeightWidthDepth) {
    const std::vector<std::uint8_t> bytes = write_legf(Grid{2, 3, 5, std::vector<float>(30, 1.0f)});
    EXPECT_EQ(bytes[8], 2);
    EXPECT_EQ(bytes[12], 3);
    EXPECT_EQ(bytes[16], 5);
    // 1.0f little-endian
    EXPECT_EQ(std::vector<std::uint8_t>(bytes.begin() + 20, bytes.begin() + 24), (std::vector<std::uint8_t>{0, 0, 0x80, 0x3f}));
}

TEST(Legf, RandomGridRoundTripsBitExactly) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const Grid g = random_grid(rng, 8, 8, 4);
        const std::vector<std::uint8_t> bytes = write_legf(g);
        const Grid back = read_legf(bytes);
        ASSERT_EQ(back, g);
        ASSERT_EQ(write_legf(back), bytes);
    }
}

TEST(Legf, EmptyGridRoundTrips) {
    const Grid g{0, 4, 3, {}};
    EXPECT_EQ(read_legf(write_legf(g)), g);
}

TEST(Legf, DistinctErrorCodes) {
    std::vector<std::uint8_t> ok = write_legf(Grid{2, 2, 1, {1, 2, 3, 4}});
    auto bad = ok;
    bad[0] = 'X';
    EXPECT_EQ(legf_error(bad), FormatErrorCode::BadMagic);
    bad = ok;
    bad[4] = 2;
    EXPECT_EQ(legf_error(bad), FormatErrorCode::BadVersion);
    bad = ok;
    bad.pop_back();
    EXPECT_EQ(legf_error(bad), FormatErrorCode::Truncated);
    EXPECT_EQ(legf_error(std::vector<std::uint8_t>(ok.begin(), ok.begin() + 10)), FormatErrorCode::Truncated);
    bad = ok;
    bad.push_back(0);
    EXPECT_EQ(legf_error(bad), FormatErrorCode::TrailingBytes);
    try {
        write_legf(Grid{1, 1, 1, {std::numeric_limits<float>::quiet_NaN()}});
        ADD_FAILURE();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.code(), FormatErrorCode::NonFinite);
    }
}

TEST(Legf, HugeDeclaredSizeIsTruncationNotAllocation) {
    std::vector<std::uint8_t> bytes = write_legf(Grid{1, 1, 1, {0.0f}});
    for (std::size_t i = 8; i < 20; ++i) bytes[i] = 0xff;
    EXPECT_EQ(legf_error(bytes), FormatErrorCode::Truncated);
}

TEST(Legf, FuzzedInputOnlyRaisesLibraryErrors) {
    std::mt19937_64 rng(2);
    EXPECT_EQ(fuzz::first_escape(write_legf(random_grid(rng, 3, 2, 2)), [](const std::vector<std::uint8_t>& b) { read_legf(b); }, 3),
              std::nullopt);
}

TEST(GridConversion, MatrixRoundTripAndIndexMaps) {
    RowMatrixXd m(6, 2);
    m << 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11;
    const Grid g = to_grid(m, 3, 2);
    EXPECT_EQ(g.height, 2u);
    EXPECT_EQ(g.width, 3u);
    EXPECT_EQ(g.at(1, 0, 1), 7.0f);
    EXPECT_EQ(grid_values(g), m);
    EXPECT_THROW(to_grid(m, 4, 2), ValidationError);

    const std::vector<int> idx{-1, 0, 3, 7};
    EXPECT_EQ(grid_indices(index_map_grid(idx, 2, 2)), idx);
    EXPECT_THROW(grid_indices(Grid{1, 1, 1, {0.5f}}), ValidationError);
    EXPECT_THROW(grid_indices(Grid{1, 1, 2, {0.0f, 1.0f}}), ValidationError);
}

TEST(EmbeddingTableFile, SinglePhraseRoundTrips) {
    EmbeddingTable t(3);
    t.add("car", Eigen::Vector3d(0.6, 0.0, 0.8));
    const EmbeddingTable back = read_embedding_table(write_embedding_table(t));
    ASSERT_EQ(back.size(), 1u);
    EXPECT_EQ(back.at("car"), t.at("car"));
    EXPECT_EQ(back.provenance(), Provenance::Exported);
}

TEST(EmbeddingTableFile, HundredRandomPhrasesRoundTrip) {
    std::mt19937_64 rng(3);
    EmbeddingTable t = random_table(rng, 100, 32);
    RowMatrixXd s(4, 32);
    for (int r = 0; r < 4; ++r) s.row(r) = oracle::random_unit(32, rng).transpose();
    t.set_codebook(Codebook(s));
    const EmbeddingTable back = read_embedding_table(write_embedding_table(t));
    ASSERT_EQ(back.size(), 100u);
    for (std::size_t i = 0; i < t.size(); ++i) {
        EXPECT_EQ(back.entries()[i].first, t.entries()[i].first);
        EXPECT_LT((back.entries()[i].second - t.entries()[i].second).cwiseAbs().maxCoeff(), 1e-12);
    }
    ASSERT_TRUE(back.codebook().has_value());
    EXPECT_LT((back.codebook()->entries() - s).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(back.provenance(), Provenance::Synthetic);
    EXPECT_EQ(write_embedding_table(back), write_embedding_table(t));
}

TEST(EmbeddingTableFile, RejectsInvalidTables) {
    EXPECT_THROW(read_embedding_table(R"({"version":1,"dim":2,"entries":[{"phrase":"a","vector":[0.5,0]}]})"), ValidationError);
    EXPECT_THROW(read_embedding_table(R"({"version":1,"dim":2,"entries":[{"phrase":"a","vector":[1,0,0]}]})"), ValidationError);
    EXPECT_THROW(read_embedding_table(R"({"version":1,"dim":2,"entries":[{"phrase":"a","vector":[1,0]},{"phrase":"a","vector":[0,1]}]})"),
                 ValidationError);
    EXPECT_THROW(read_embedding_table("{"), ParseError);
    EXPECT_THROW(read_embedding_table(R"({"version":2,"dim":2,"entries":[]})"), ParseError);
    EXPECT_THROW(read_embedding_table(R"({"version":1,"dim":2,"entries":[{"phrase":"a","vector":["x",0]}]})"), ParseError);
    // within 1e-6 of unit norm is accepted
    EXPECT_NO_THROW(read_embedding_table(R"({"version":1,"dim":2,"entries":[{"phrase":"a","vector":[1.0000004,0]}]})"));
}

TEST(EmbeddingTableFile, FuzzedInputOnlyRaisesLibraryErrors) {
    std::mt19937_64 rng(4);
    const std::string text = write_embedding_table(random_table(rng, 3, 4));
    EXPECT_EQ(fuzz::first_escape(fuzz::bytes_of(text), [](const std::vector<std::uint8_t>& b) { read_embedding_table(fuzz::text_of(b)); }, 5),
              std::nullopt);
}

TEST(Images, PpmHeaderAndRounding) {
    RenderedImage<double> img{2, 1, RowMatrixXd(2, 3)};
    img.pixels << 0.0, 0.5, 1.0,
                  1.2, -0.1, 0.25;
    const std::vector<std::uint8_t> b = write_ppm(img);
    const std::string header = "P6\n2 1\n255\n";
    ASSERT_EQ(b.size(), header.size() + 6);
    EXPECT_EQ(std::string(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(header.size())), header);
    EXPECT_EQ(std::vector<std::uint8_t>(b.end() - 6, b.end()), (std::vector<std::uint8_t>{0, 128, 255, 255, 0, 64}));
}

TEST(Images, RelevancyPreviewRoundsHalfUp) {
    const RelevancyMap r = oracle::scores_from({0.5, 1.0 / 255.0 * 0.5, 0.001}, 3, 1);
    const GrayImage g = read_pgm(relevancy_preview_pgm(r));
    EXPECT_EQ(g.pixels, (std::vector<std::uint8_t>{128, 1, 0}));
}

TEST(Images, MaskRoundTrip) {
    const SegMask m = oracle::mask_from({true, false, false, true, true, false}, 3, 2);
    const SegMask back = read_mask_pgm(mask_pgm(m));
    EXPECT_EQ(back.width, 3);
    EXPECT_EQ(back.height, 2);
    EXPECT_TRUE((back.pixels == m.pixels).all());
}

TEST(Images, PgmCommentsAndErrors) {
    const std::string text = "P5\n# made by hand\n2 1\n255\n";
    std::vector<std::uint8_t> b(text.begin(), text.end());
    b.push_back(7);
    b.push_back(200);
    EXPECT_EQ(read_pgm(b).pixels, (std::vector<std::uint8_t>{7, 200}));
    b.push_back(1);
    EXPECT_THROW(read_pgm(b), FormatError);
    const std::string p2 = "P2\n1 1\n255\n0";
    EXPECT_THROW(read_pgm(std::vector<std::uint8_t>(p2.begin(), p2.end())), FormatError);
    const std::string deep = "P5\n1 1\n65535\n\0\0";
    EXPECT_THROW(read_pgm(std::vector<std::uint8_t>(deep.begin(), deep.end())), FormatError);
}

TEST(Images, FuzzedPgmOnlyRaisesLibraryErrors) {
    EXPECT_EQ(fuzz::first_escape(mask_pgm(oracle::mask_from({true, false, true, true}, 2, 2)),
                                 [](const std::vector<std::uint8_t>& b) { read_pgm(b); }, 6),
              std::nullopt);
}

TEST(Files, MissingFileIsAValidationError) {
    EXPECT_THROW(read_file("/nonexistent/lesplat/file.legf"), ValidationError);
    EXPECT_THROW(write_file("/nonexistent/lesplat/file.legf", std::vector<std::uint8_t>{1}), ValidationError);
}
