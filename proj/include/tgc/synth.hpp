#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "tgc/maskio.hpp"

namespace tgc {

/// Parameters of a gland-like synthetic scene: wobbly disks on a noisy background.
struct SceneSpec {
    int width = 64;
    int height = 64;
    int min_blobs = 2;
    int max_blobs = 5;
    double min_radius = 4.0;
    double max_radius = 8.0;
    double wobble = 0.2;  // boundary perturbation amplitude as a fraction of the radius
    double noise_sd = 0.12;
    double fg_level = 0.7;
    double bg_level = 0.3;
    std::uint64_t seed = 0;

    void validate() const;
};

struct Sample {
    int index = 0;
    ProbMap image;
    LabelMask mask;
    int blobs_requested = 0;
    int blobs_placed = 0;
};

inline constexpr int kMaxPlacementTries = 1000;

/// Fully determined by (spec.seed, index). Blob centers are rejection-sampled so
/// blob outlines never touch; a blob that cannot be placed in kMaxPlacementTries
/// draws is dropped and blobs_placed records the shortfall.
Sample generate_scene(const SceneSpec& spec, int index);

struct ManifestEntry {
    int index = 0;
    std::string image;  // relative to the manifest's directory
    std::string mask;
    std::uint64_t seed = 0;
    int blobs_requested = 0;
    int blobs_placed = 0;
    std::string image_checksum;  // FNV-1a 64, hex
    std::string mask_checksum;
};

struct Manifest {
    std::filesystem::path directory;
    SceneSpec spec;
    std::vector<ManifestEntry> samples;
};

/// Writes img_NNNN.pgm / mask_NNNN.pgm (binary PGM) and manifest.json into out_dir.
Manifest generate_dataset(const SceneSpec& spec, int n, const std::filesystem::path& out_dir);

nlohmann::json manifest_to_json(const Manifest& m);
Manifest load_manifest(const std::filesystem::path& manifest_path);

/// FNV-1a 64-bit hash of a file's bytes as 16 hex digits.
std::string file_checksum(const std::filesystem::path& path);

/// Binary mask with an axis-aligned square of side `side` centred on each point.
LabelMask render_squares(int width, int height, const std::vector<Point>& centers, int side);

}  // namespace tgc
