#pragma once

#include "lesplat/relevancy.hpp"
#include "lesplat/render.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace lesplat {

/// Dense float grid as stored in a LEGF file: height x width x depth, depth fastest.
struct Grid {
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::uint32_t depth = 0;
    std::vector<float> data;

    std::size_t element_count() const {
        return static_cast<std::size_t>(height) * static_cast<std::size_t>(width) * static_cast<std::size_t>(depth);
    }
    float& at(std::uint32_t y, std::uint32_t x, std::uint32_t d) { return data[(static_cast<std::size_t>(y) * width + x) * depth + d]; }
    float at(std::uint32_t y, std::uint32_t x, std::uint32_t d) const { return data[(static_cast<std::size_t>(y) * width + x) * depth + d]; }

    bool operator==(const Grid&) const = default;
};

inline constexpr std::uint32_t kLegfVersion = 1;
inline constexpr std::size_t kLegfHeaderSize = 20;

/// "LEGF", u32 version, u32 height, u32 width, u32 depth, then f32 payload; all little-endian.
std::vector<std::uint8_t> write_legf(const Grid& grid);
Grid read_legf(std::span<const std::uint8_t> bytes);

/// Pixel-major matrix (pixels x depth) <-> grid. Values are narrowed to f32.
Grid to_grid(const RowMatrixXd& values, int width, int height);
RowMatrixXd grid_values(const Grid& grid);

Grid to_grid(const RelevancyMap& r);
Grid to_grid(const SemanticDistributionMap<double>& m);
Grid to_grid(const FeatureMap& f);

/// Index maps (-1 = no target) travel as depth-1 grids.
Grid index_map_grid(std::span<const int> indices, int width, int height);
std::vector<int> grid_indices(const Grid& grid);

/// JSON {version, dim, provenance, entries:[{phrase, vector}], codebook}.
std::string write_embedding_table(const EmbeddingTable& table);
EmbeddingTable read_embedding_table(const std::string& text);

// Binary PGM/PPM (P5/P6, maxval 255).
std::vector<std::uint8_t> write_ppm(const RenderedImage<double>& image);
std::vector<std::uint8_t> write_pgm(int width, int height, std::span<const std::uint8_t> pixels);
std::vector<std::uint8_t> relevancy_preview_pgm(const RelevancyMap& r); // round-half-up of score * 255
std::vector<std::uint8_t> mask_pgm(const SegMask& mask);                 // 0 / 255

struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;
};
GrayImage read_pgm(std::span<const std::uint8_t> bytes);
/// Pixels above 127 are inside the mask.
SegMask read_mask_pgm(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_file(const std::filesystem::path& path, const std::string& text);

} // namespace lesplat
