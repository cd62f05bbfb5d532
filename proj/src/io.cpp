#include "lesplat/io.hpp"

#include "lesplat/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

namespace lesplat {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int shift = 0; shift < 32; shift += 8) {
        out.push_back(static_cast<std::uint8_t>((v >> shift) & 0xffu));
    }
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(bytes[at + static_cast<std::size_t>(i)]) << (8 * i);
    }
    return v;
}

std::uint8_t round_half_up_255(double v) {
    const double scaled = std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5);
    return static_cast<std::uint8_t>(scaled);
}

} // namespace

std::vector<std::uint8_t> write_legf(const Grid& grid) {
    if (grid.data.size() != grid.element_count()) {
        throw FormatError(FormatErrorCode::BadHeader, "grid payload does not match its dimensions");
    }
    std::vector<std::uint8_t> out;
    out.reserve(kLegfHeaderSize + 4 * grid.data.size());
    for (char c : {'L', 'E', 'G', 'F'}) {
        out.push_back(static_cast<std::uint8_t>(c));
    }
    put_u32(out, kLegfVersion);
    put_u32(out, grid.height);
    put_u32(out, grid.width);
    put_u32(out, grid.depth);
    for (std::size_t i = 0; i < grid.data.size(); ++i) {
        const float v = grid.data[i];
        if (!std::isfinite(v)) {
            throw FormatError(FormatErrorCode::NonFinite, "element " + std::to_string(i) + " is not finite");
        }
        put_u32(out, std::bit_cast<std::uint32_t>(v));
    }
    return out;
}

Grid read_legf(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || bytes[0] != 'L' || bytes[1] != 'E' || bytes[2] != 'G' || bytes[3] != 'F') {
        throw FormatError(FormatErrorCode::BadMagic, "not a LEGF file");
    }
    if (bytes.size() < kLegfHeaderSize) {
        throw FormatError(FormatErrorCode::Truncated, "header is shorter than 20 bytes");
    }
    const std::uint32_t version = get_u32(bytes, 4);
    if (version != kLegfVersion) {
        throw FormatError(FormatErrorCode::BadVersion, "version " + std::to_string(version));
    }
    Grid grid;
    grid.height = get_u32(bytes, 8);
    grid.width = get_u32(bytes, 12);
    grid.depth = get_u32(bytes, 16);
    const auto payload = bytes.size() - kLegfHeaderSize;
    const unsigned __int128 needed = static_cast<unsigned __int128>(grid.height) * grid.width * grid.depth * 4u;
    if (needed > payload) {
        throw FormatError(FormatErrorCode::Truncated, "payload holds " + std::to_string(payload) + " bytes");
    }
    if (needed < payload) {
        throw FormatError(FormatErrorCode::TrailingBytes, "payload is longer than the header declares");
    }
    grid.data.resize(grid.element_count());
    for (std::size_t i = 0; i < grid.data.size(); ++i) {
        grid.data[i] = std::bit_cast<float>(get_u32(bytes, kLegfHeaderSize + 4 * i));
    }
    return grid;
}

Grid to_grid(const RowMatrixXd& values, int width, int height) {
    if (width < 0 || height < 0 || values.rows() != static_cast<Eigen::Index>(width) * height) {
        throw ValidationError("grid values do not match width x height");
    }
    Grid g;
    g.height = static_cast<std::uint32_t>(height);
    g.width = static_cast<std::uint32_t>(width);
    g.depth = static_cast<std::uint32_t>(values.cols());
    g.data.resize(g.element_count());
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        g.data[static_cast<std::size_t>(i)] = static_cast<float>(values.data()[i]);
    }
    return g;
}

RowMatrixXd grid_values(const Grid& grid) {
    RowMatrixXd out(static_cast<Eigen::Index>(grid.height) * grid.width, static_cast<Eigen::Index>(grid.depth));
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        out.data()[i] = grid.data[static_cast<std::size_t>(i)];
    }
    return out;
}

Grid to_grid(const RelevancyMap& r) { return to_grid(RowMatrixXd(r.scores), r.width, r.height); }
Grid to_grid(const SemanticDistributionMap<double>& m) { return to_grid(m.probs, m.width, m.height); }
Grid to_grid(const FeatureMap& f) { return to_grid(f.values, f.width, f.height); }

Grid index_map_grid(std::span<const int> indices, int width, int height) {
    RowMatrixXd values(static_cast<Eigen::Index>(indices.size()), 1);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        values(static_cast<Eigen::Index>(i), 0) = indices[i];
    }
    return to_grid(values, width, height);
}

std::vector<int> grid_indices(const Grid& grid) {
    if (grid.depth != 1) {
        throw ValidationError("index maps must have depth 1");
    }
    std::vector<int> out;
    out.reserve(grid.data.size());
    for (float v : grid.data) {
        if (v != std::round(v) || v < -1.0f || v > 1e9f) {
            throw ValidationError("index map holds a non-integer value");
        }
        out.push_back(static_cast<int>(v));
    }
    return out;
}

// ---------------------------------------------------------------------------

std::string write_embedding_table(const EmbeddingTable& table) {
    using json = nlohmann::ordered_json;
    json entries = json::array();
    for (const auto& [phrase, vec] : table.entries()) {
        entries.push_back({{"phrase", phrase}, {"vector", std::vector<double>(vec.begin(), vec.end())}});
    }
    json doc = {{"version", 1},
                {"dim", table.dim()},
                {"provenance", table.provenance() == Provenance::Synthetic ? "synthetic" : "exported"},
                {"entries", entries}};
    if (table.codebook()) {
        json rows = json::array();
        const auto& s = table.codebook()->entries();
        for (Eigen::Index r = 0; r < s.rows(); ++r) {
            rows.push_back(std::vector<double>(s.row(r).begin(), s.row(r).end()));
        }
        doc["codebook"] = rows;
    }
    return doc.dump(1);
}

EmbeddingTable read_embedding_table(const std::string& text) {
    using json = nlohmann::json;
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed embedding table JSON: ") + e.what());
    }
    const auto vector_of = [](const json& j, int dim, const std::string& what) {
        if (!j.is_array()) {
            throw ParseError(what + " must be an array of numbers");
        }
        if (static_cast<int>(j.size()) != dim) {
            throw ValidationError(what + " has length " + std::to_string(j.size()) + ", table dim is " +
                                  std::to_string(dim));
        }
        VectorXd v(dim);
        for (int i = 0; i < dim; ++i) {
            const json& x = j[static_cast<std::size_t>(i)];
            if (!x.is_number()) {
                throw ParseError(what + " must be an array of numbers");
            }
            v[i] = x.get<double>();
        }
        return v;
    };
    if (!doc.is_object() || !doc.contains("version") || !doc.contains("dim") || !doc.contains("entries")) {
        throw ParseError("embedding table needs version, dim and entries");
    }
    if (!doc["version"].is_number_integer() || doc["version"].get<std::int64_t>() != 1) {
        throw ParseError("unsupported embedding table version");
    }
    if (!doc["dim"].is_number_integer() || doc["dim"].get<std::int64_t>() < 1 || doc["dim"].get<std::int64_t>() > (1 << 20)) {
        throw ParseError("embedding table dim must be a positive integer");
    }
    const int dim = doc["dim"].get<int>();
    Provenance provenance = Provenance::Exported;
    if (doc.contains("provenance")) {
        const json& p = doc["provenance"];
        if (p == "synthetic") {
            provenance = Provenance::Synthetic;
        } else if (p != "exported") {
            throw ParseError("provenance must be 'synthetic' or 'exported'");
        }
    }
    EmbeddingTable table(dim, provenance);
    const json& entries = doc["entries"];
    if (!entries.is_array()) {
        throw ParseError("entries must be an array");
    }
    for (const json& e : entries) {
        if (!e.is_object() || !e.contains("phrase") || !e["phrase"].is_string() || !e.contains("vector")) {
            throw ParseError("each entry needs a string phrase and a vector");
        }
        const auto phrase = e["phrase"].get<std::string>();
        table.add(phrase, vector_of(e["vector"], dim, "vector for '" + phrase + "'"));
    }
    if (doc.contains("codebook")) {
        const json& cb = doc["codebook"];
        if (!cb.is_array() || cb.empty()) {
            throw ParseError("codebook must be a non-empty array of rows");
        }
        RowMatrixXd s(static_cast<Eigen::Index>(cb.size()), dim);
        for (std::size_t r = 0; r < cb.size(); ++r) {
            s.row(static_cast<Eigen::Index>(r)) = vector_of(cb[r], dim, "codebook row").transpose();
        }
        table.set_codebook(Codebook(std::move(s)));
    }
    return table;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::uint8_t> netpbm(const char* magic, int width, int height) {
    const std::string header = std::string(magic) + "\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    return {header.begin(), header.end()};
}

} // namespace

std::vector<std::uint8_t> write_ppm(const RenderedImage<double>& image) {
    auto out = netpbm("P6", image.width, image.height);
    for (Eigen::Index i = 0; i < image.pixels.size(); ++i) {
        out.push_back(round_half_up_255(image.pixels.data()[i]));
    }
    return out;
}

std::vector<std::uint8_t> write_pgm(int width, int height, std::span<const std::uint8_t> pixels) {
    if (pixels.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw ValidationError("pgm pixel count does not match its dimensions");
    }
    auto out = netpbm("P5", width, height);
    out.insert(out.end(), pixels.begin(), pixels.end());
    return out;
}

std::vector<std::uint8_t> relevancy_preview_pgm(const RelevancyMap& r) {
    std::vector<std::uint8_t> px;
    px.reserve(static_cast<std::size_t>(r.scores.size()));
    for (Eigen::Index i = 0; i < r.scores.size(); ++i) {
        px.push_back(round_half_up_255(r.scores[i]));
    }
    return write_pgm(r.width, r.height, px);
}

std::vector<std::uint8_t> mask_pgm(const SegMask& mask) {
    std::vector<std::uint8_t> px;
    px.reserve(static_cast<std::size_t>(mask.pixels.size()));
    for (Eigen::Index i = 0; i < mask.pixels.size(); ++i) {
        px.push_back(mask.pixels[i] ? 255 : 0);
    }
    return write_pgm(mask.width, mask.height, px);
}

GrayImage read_pgm(std::span<const std::uint8_t> bytes) {
    std::size_t at = 0;
    const auto skip_space_and_comments = [&] {
        while (at < bytes.size()) {
            if (bytes[at] == '#') {
                while (at < bytes.size() && bytes[at] != '\n') {
                    ++at;
                }
            } else if (std::isspace(bytes[at])) {
                ++at;
            } else {
                break;
            }
        }
    };
    const auto read_int = [&]() -> long {
        skip_space_and_comments();
        long v = 0;
        std::size_t digits = 0;
        while (at < bytes.size() && bytes[at] >= '0' && bytes[at] <= '9' && digits < 9) {
            v = v * 10 + (bytes[at] - '0');
            ++at;
            ++digits;
        }
        if (digits == 0) {
            throw FormatError(FormatErrorCode::BadHeader, "expected a number in the PGM header");
        }
        return v;
    };
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
        throw FormatError(FormatErrorCode::BadMagic, "not a binary PGM (P5)");
    }
    at = 2;
    GrayImage img;
    img.width = static_cast<int>(read_int());
    img.height = static_cast<int>(read_int());
    const long maxval = read_int();
    if (maxval != 255 || img.width < 1 || img.height < 1) {
        throw FormatError(FormatErrorCode::BadHeader, "PGM must be 8-bit with positive dimensions");
    }
    if (at >= bytes.size() || !std::isspace(bytes[at])) {
        throw FormatError(FormatErrorCode::Truncated, "PGM header is not terminated");
    }
    ++at;
    const std::size_t n = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
    if (bytes.size() - at < n) {
        throw FormatError(FormatErrorCode::Truncated, "PGM pixel data is short");
    }
    if (bytes.size() - at > n) {
        throw FormatError(FormatErrorCode::TrailingBytes, "PGM has extra bytes");
    }
    img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(at), bytes.end());
    return img;
}

SegMask read_mask_pgm(std::span<const std::uint8_t> bytes) {
    const GrayImage img = read_pgm(bytes);
    SegMask m{img.width, img.height, Eigen::Array<bool, Eigen::Dynamic, 1>(static_cast<Eigen::Index>(img.pixels.size()))};
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        m.pixels[static_cast<Eigen::Index>(i)] = img.pixels[i] > 127;
    }
    return m;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot open '" + path.string() + "'");
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_text_file(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return {bytes.begin(), bytes.end()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw ValidationError("cannot write '" + path.string() + "'");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

} // namespace lesplat
