#include "tgc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numbers>

#include "tgc/error.hpp"
#include "tgc/rng.hpp"

namespace tgc {

void SceneSpec::validate() const {
    if (width < 1 || height < 1 || width > kMaxMapDim || height > kMaxMapDim) {
        throw ValidationError("scene size out of range");
    }
    if (min_blobs < 0 || max_blobs < min_blobs) throw ValidationError("blob count range invalid");
    if (!(min_radius > 0.0) || max_radius < min_radius) throw ValidationError("radius range invalid");
    if (!(wobble >= 0.0 && wobble < 1.0)) throw ValidationError("wobble must lie in [0,1)");
    if (!(noise_sd >= 0.0)) throw ValidationError("noise_sd must be nonnegative");
    if (!(fg_level > bg_level)) throw ValidationError("fg_level must exceed bg_level");
    if (bg_level < 0.0 || fg_level > 1.0) throw ValidationError("intensity levels must lie in [0,1]");
}

namespace {

constexpr int kHarmonics = 3;  // sinusoid orders 2..4

struct Blob {
    double cx = 0.0;
    double cy = 0.0;
    double r0 = 0.0;
    double amp[kHarmonics] = {};
    double phase[kHarmonics] = {};

    double outer_radius(double wobble) const { return r0 * (1.0 + wobble); }

    double radius_at(double theta, double wobble) const {
        double s = 0.0;
        for (int h = 0; h < kHarmonics; ++h) s += amp[h] * std::sin((h + 2) * theta + phase[h]);
        return r0 * (1.0 + wobble * s);
    }
};

void paint(const Blob& b, double wobble, LabelMask& mask) {
    const double reach = b.outer_radius(wobble);
    const int x0 = std::max(0, static_cast<int>(std::floor(b.cx - reach)));
    const int x1 = std::min(mask.width() - 1, static_cast<int>(std::ceil(b.cx + reach)));
    const int y0 = std::max(0, static_cast<int>(std::floor(b.cy - reach)));
    const int y1 = std::min(mask.height() - 1, static_cast<int>(std::ceil(b.cy + reach)));
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const double dx = x - b.cx;
            const double dy = y - b.cy;
            const double rho = std::hypot(dx, dy);
            if (rho <= b.radius_at(std::atan2(dy, dx), wobble)) mask.set(x, y, true);
        }
    }
}

}  // namespace

Sample generate_scene(const SceneSpec& spec, int index) {
    spec.validate();
    if (index < 0) throw ValidationError("scene index must be nonnegative");
    const auto idx = static_cast<std::uint64_t>(index);
    Rng layout = make_rng(spec.seed, idx, RngTag::scene_layout);
    Rng shape = make_rng(spec.seed, idx, RngTag::scene_shape);
    Rng noise = make_rng(spec.seed, idx, RngTag::scene_noise);

    Sample s;
    s.index = index;
    s.blobs_requested = layout.uniform_int(spec.min_blobs, spec.max_blobs);

    std::vector<Blob> blobs;
    for (int b = 0; b < s.blobs_requested; ++b) {
        Blob blob;
        blob.r0 = shape.uniform(spec.min_radius, spec.max_radius);
        double amp_sum = 0.0;
        for (int h = 0; h < kHarmonics; ++h) {
            blob.amp[h] = shape.uniform();
            blob.phase[h] = shape.uniform(0.0, 2.0 * std::numbers::pi);
            amp_sum += blob.amp[h];
        }
        // Normalized amplitudes keep |sum| <= 1, so the radius stays within r0 (1 +- wobble).
        for (double& a : blob.amp) a = amp_sum > 0.0 ? a / amp_sum : 0.0;

        const double reach = blob.outer_radius(spec.wobble);
        const double lo_x = std::min(reach, 0.5 * (spec.width - 1));
        const double lo_y = std::min(reach, 0.5 * (spec.height - 1));
        bool placed = false;
        for (int attempt = 0; attempt < kMaxPlacementTries && !placed; ++attempt) {
            blob.cx = layout.uniform(lo_x, spec.width - 1 - lo_x);
            blob.cy = layout.uniform(lo_y, spec.height - 1 - lo_y);
            // A gap wider than sqrt(2) keeps blobs from being 8-adjacent.
            placed = std::all_of(blobs.begin(), blobs.end(), [&](const Blob& other) {
                return std::hypot(blob.cx - other.cx, blob.cy - other.cy) >
                       reach + other.outer_radius(spec.wobble) + 1.5;
            });
        }
        if (placed) blobs.push_back(blob);
    }
    s.blobs_placed = static_cast<int>(blobs.size());

    s.mask = LabelMask(spec.width, spec.height);
    for (const auto& b : blobs) paint(b, spec.wobble, s.mask);

    std::vector<double> pixels(s.mask.size());
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        double v = spec.bg_level + (spec.fg_level - spec.bg_level) * s.mask[i];
        if (spec.noise_sd > 0.0) v += spec.noise_sd * noise.normal();
        pixels[i] = std::clamp(v, 0.0, 1.0);
    }
    s.image = ProbMap(spec.width, spec.height, std::move(pixels));
    return s;
}

std::string file_checksum(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::istreambuf_iterator<char> it(in), end; it != end; ++it) {
        h ^= static_cast<unsigned char>(*it);
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

nlohmann::json spec_to_json(const SceneSpec& s) {
    return {{"width", s.width},         {"height", s.height},       {"min_blobs", s.min_blobs},
            {"max_blobs", s.max_blobs}, {"min_radius", s.min_radius}, {"max_radius", s.max_radius},
            {"wobble", s.wobble},       {"noise_sd", s.noise_sd},   {"fg_level", s.fg_level},
            {"bg_level", s.bg_level},   {"seed", s.seed}};
}

SceneSpec spec_from_json(const nlohmann::json& j) {
    SceneSpec s;
    s.width = j.at("width");
    s.height = j.at("height");
    s.min_blobs = j.at("min_blobs");
    s.max_blobs = j.at("max_blobs");
    s.min_radius = j.at("min_radius");
    s.max_radius = j.at("max_radius");
    s.wobble = j.at("wobble");
    s.noise_sd = j.at("noise_sd");
    s.fg_level = j.at("fg_level");
    s.bg_level = j.at("bg_level");
    s.seed = j.at("seed");
    return s;
}

std::string numbered(const char* stem, int index) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%04d.pgm", stem, index);
    return buf;
}

}  // namespace

nlohmann::json manifest_to_json(const Manifest& m) {
    auto samples = nlohmann::json::array();
    for (const auto& e : m.samples) {
        samples.push_back({{"index", e.index},
                           {"image", e.image},
                           {"mask", e.mask},
                           {"seed", e.seed},
                           {"blobs_requested", e.blobs_requested},
                           {"blobs_placed", e.blobs_placed},
                           {"image_checksum", e.image_checksum},
                           {"mask_checksum", e.mask_checksum}});
    }
    return {{"format", "tgc-manifest"}, {"version", 1}, {"spec", spec_to_json(m.spec)}, {"samples", samples}};
}

Manifest generate_dataset(const SceneSpec& spec, int n, const std::filesystem::path& out_dir) {
    spec.validate();
    if (n < 0) throw ValidationError("sample count must be nonnegative");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec || !std::filesystem::is_directory(out_dir)) throw IoError("cannot create directory " + out_dir.string());

    Manifest m;
    m.directory = out_dir;
    m.spec = spec;
    for (int i = 0; i < n; ++i) {
        const Sample s = generate_scene(spec, i);
        ManifestEntry e;
        e.index = i;
        e.image = numbered("img", i);
        e.mask = numbered("mask", i);
        e.seed = spec.seed;
        e.blobs_requested = s.blobs_requested;
        e.blobs_placed = s.blobs_placed;
        save_pgm(out_dir / e.image, s.image, MapFormat::pgm_binary);
        save_pgm(out_dir / e.mask, s.mask, MapFormat::pgm_binary);
        e.image_checksum = file_checksum(out_dir / e.image);
        e.mask_checksum = file_checksum(out_dir / e.mask);
        m.samples.push_back(std::move(e));
    }

    std::ofstream out(out_dir / "manifest.json");
    if (!out) throw IoError("cannot write " + (out_dir / "manifest.json").string());
    out << manifest_to_json(m).dump(2) << '\n';
    if (!out) throw IoError("write failed: " + (out_dir / "manifest.json").string());
    return m;
}

Manifest load_manifest(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw IoError("cannot open manifest " + manifest_path.string());
    nlohmann::json j;
    try {
        in >> j;
        Manifest m;
        m.directory = manifest_path.parent_path();
        m.spec = spec_from_json(j.at("spec"));
        for (const auto& s : j.at("samples")) {
            ManifestEntry e;
            e.index = s.at("index");
            e.image = s.at("image");
            e.mask = s.at("mask");
            e.seed = s.value("seed", std::uint64_t{0});
            e.blobs_requested = s.value("blobs_requested", 0);
            e.blobs_placed = s.value("blobs_placed", 0);
            e.image_checksum = s.value("image_checksum", "");
            e.mask_checksum = s.value("mask_checksum", "");
            m.samples.push_back(std::move(e));
        }
        return m;
    } catch (const nlohmann::json::exception& ex) {
        throw FormatError(manifest_path.string() + ": malformed manifest (" + ex.what() + ")");
    }
}

LabelMask render_squares(int width, int height, const std::vector<Point>& centers, int side) {
    if (side < 1) throw ValidationError("square side must be positive");
    LabelMask mask(width, height);
    for (const auto& c : centers) {
        // Square of `side` pixels whose pixel-centre mean is c.
        const int x0 = static_cast<int>(std::lround(c.x - 0.5 * (side - 1)));
        const int y0 = static_cast<int>(std::lround(c.y - 0.5 * (side - 1)));
        for (int y = y0; y < y0 + side; ++y) {
            for (int x = x0; x < x0 + side; ++x) {
                if (x >= 0 && x < width && y >= 0 && y < height) mask.set(x, y, true);
            }
        }
    }
    return mask;
}

}  // namespace tgc
