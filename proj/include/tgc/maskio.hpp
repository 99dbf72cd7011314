#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace tgc {

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

inline constexpr int kMaxMapDim = 4096;

/// Per-pixel foreground probability grid, row-major.
class ProbMap {
public:
    ProbMap() = default;
    ProbMap(int width, int height, double fill = 0.0);
    /// Validates dimensions and that every value lies in [0,1].
    ProbMap(int width, int height, std::vector<double> values);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return values_.size(); }

    double operator[](std::size_t i) const { return values_[i]; }
    double at(int x, int y) const { return values_[index(x, y)]; }
    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }

    std::span<const double> values() const noexcept { return values_; }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> values_;
};

/// Binary label grid, 0 = background, 1 = foreground.
class LabelMask {
public:
    LabelMask() = default;
    LabelMask(int width, int height, std::uint8_t fill = 0);
    LabelMask(int width, int height, std::vector<std::uint8_t> labels);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return labels_.size(); }

    std::uint8_t operator[](std::size_t i) const { return labels_[i]; }
    std::uint8_t at(int x, int y) const { return labels_[index(x, y)]; }
    void set(int x, int y, bool fg) { labels_[index(x, y)] = fg ? 1 : 0; }
    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }

    std::span<const std::uint8_t> labels() const noexcept { return labels_; }
    std::size_t foreground_count() const;

    /// Probability view of the mask (0.0 / 1.0 per pixel).
    ProbMap to_prob_map() const;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> labels_;
};

struct Region {
    int id = 0;
    std::vector<std::size_t> pixels;  // flat indices, raster order
    Point hard_centroid;

    std::size_t area() const noexcept { return pixels.size(); }
};

struct RegionSet {
    std::vector<Region> regions;
    int width = 0;
    int height = 0;

    std::size_t size() const noexcept { return regions.size(); }
    bool empty() const noexcept { return regions.empty(); }
};

enum class MapFormat { pgm_ascii, pgm_binary, csv_grid };
enum class Connectivity { four = 4, eight = 8 };
enum class CentroidMode { hard, soft };

/// Loads a map. PGM values are divided by maxval; CSV values are taken verbatim and must lie in [0,1].
ProbMap load_map(const std::filesystem::path& path, MapFormat format);
/// Picks the format from the file's magic number ("P2"/"P5"), falling back to CSV.
ProbMap load_map(const std::filesystem::path& path);

/// Writes 8-bit PGM (values rounded to round(v*255)).
void save_pgm(const std::filesystem::path& path, const ProbMap& map, MapFormat format = MapFormat::pgm_binary);
void save_pgm(const std::filesystem::path& path, const LabelMask& mask, MapFormat format = MapFormat::pgm_binary);

/// label = 1 iff value > t. Requires t in (0,1).
LabelMask threshold(const ProbMap& p, double t);

/// Labels foreground components and drops those with area < min_area.
/// Ids are dense and follow the raster order of each region's first pixel.
RegionSet connected_components(const LabelMask& mask, Connectivity connectivity, std::size_t min_area);

/// Probability mass of a region under p.
double region_mass(const Region& region, const ProbMap& p);

/// Hard: unweighted pixel mean. Soft: probability-weighted mean over the region's pixels.
/// Throws DegenerateError for a zero-mass region in soft mode.
std::vector<Point> centroids(const RegionSet& rs, const ProbMap& p, CentroidMode mode);

struct Overlap {
    double dice = 0.0;
    double jaccard = 0.0;
};

/// Both-empty masks score (1, 1).
Overlap dice_jaccard(const LabelMask& pred, const LabelMask& ref);

}  // namespace tgc
