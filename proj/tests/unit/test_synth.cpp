#include <gtest/gtest.h>

#include <array>
#include <filesystem>
#include <nlohmann/json.hpp>

#include "support.hpp"
#include "tgc/error.hpp"
#include "tgc/rng.hpp"
#include "tgc/synth.hpp"

using namespace tgc;
using testing_support::read_bytes;
using testing_support::TempDir;

TEST(Rng, CounterStreamsAreIndependentOfOrder) {
    Rng a = make_rng(5, 17, RngTag::scene_noise);
    Rng b = make_rng(5, 17, RngTag::scene_noise);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
    Rng c = make_rng(5, 18, RngTag::scene_noise);
    Rng d = make_rng(5, 17, RngTag::scene_shape);
    EXPECT_NE(make_rng(5, 17, RngTag::scene_noise).next(), c.next());
    EXPECT_NE(make_rng(5, 17, RngTag::scene_noise).next(), d.next());
}

TEST(Rng, NormalMoments) {
    Rng r(1);
    double s = 0.0;
    double s2 = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double z = r.normal();
        s += z;
        s2 += z * z;
    }
    EXPECT_NEAR(s / n, 0.0, 0.01);
    EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(GenerateScene, NoiselessDiskThresholdsExactly) {
    SceneSpec spec;
    spec.noise_sd = 0.0;
    spec.wobble = 0.0;
    spec.min_blobs = spec.max_blobs = 1;
    for (int i = 0; i < 10; ++i) {
        const Sample s = generate_scene(spec, i);
        EXPECT_EQ(s.blobs_placed, 1);
        const LabelMask t = threshold(s.image, 0.5 * (spec.fg_level + spec.bg_level));
        EXPECT_EQ(t.labels().size(), s.mask.labels().size());
        EXPECT_TRUE(std::equal(t.labels().begin(), t.labels().end(), s.mask.labels().begin()));
        for (double v : s.image.values()) EXPECT_TRUE(v == spec.fg_level || v == spec.bg_level);
    }
}

TEST(GenerateScene, Deterministic) {
    SceneSpec spec;
    spec.seed = 77;
    for (int i : {0, 3, 41}) {
        const Sample a = generate_scene(spec, i);
        const Sample b = generate_scene(spec, i);
        EXPECT_TRUE(std::equal(a.image.values().begin(), a.image.values().end(), b.image.values().begin()));
        EXPECT_TRUE(std::equal(a.mask.labels().begin(), a.mask.labels().end(), b.mask.labels().begin()));
    }
    spec.seed = 78;
    const Sample c = generate_scene(spec, 0);
    spec.seed = 77;
    const Sample d = generate_scene(spec, 0);
    EXPECT_FALSE(std::equal(c.image.values().begin(), c.image.values().end(), d.image.values().begin()));
}

TEST(GenerateScene, ComponentCountMatchesPlacedBlobs) {
    SceneSpec spec;
    spec.min_blobs = spec.max_blobs = 3;
    int placed_all = 0;
    for (int i = 0; i < 100; ++i) {
        const Sample s = generate_scene(spec, i);
        EXPECT_EQ(s.blobs_requested, 3);
        if (s.blobs_placed != 3) continue;
        ++placed_all;
        EXPECT_EQ(connected_components(s.mask, Connectivity::eight, 1).size(), 3u) << "index " << i;
    }
    EXPECT_GT(placed_all, 90);
}

TEST(GenerateScene, BlobCountDistributionChiSquare) {
    SceneSpec spec;  // blobs uniform on {2,3,4,5}
    std::array<int, 4> counts{};
    const int n = 500;
    for (int i = 0; i < n; ++i) {
        const Sample s = generate_scene(spec, i);
        ASSERT_GE(s.blobs_requested, 2);
        ASSERT_LE(s.blobs_requested, 5);
        ++counts[s.blobs_requested - 2];
        EXPECT_LE(s.blobs_placed, s.blobs_requested);
    }
    double chi2 = 0.0;
    const double expected = n / 4.0;
    for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
    EXPECT_LT(chi2, 16.266);  // 3 degrees of freedom, p = 0.001
}

TEST(GenerateScene, ValidatesSpec) {
    SceneSpec spec;
    spec.fg_level = 0.2;
    EXPECT_THROW(generate_scene(spec, 0), ValidationError);
    spec = SceneSpec{};
    spec.wobble = 1.0;
    EXPECT_THROW(generate_scene(spec, 0), ValidationError);
    spec = SceneSpec{};
    spec.min_radius = 0.0;
    EXPECT_THROW(generate_scene(spec, 0), ValidationError);
}

TEST(GenerateDataset, FilesAndManifest) {
    TempDir dir;
    SceneSpec spec;
    spec.seed = 3;
    const Manifest m = generate_dataset(spec, 10, dir.path());
    ASSERT_EQ(m.samples.size(), 10u);
    int pgm = 0;
    for (const auto& e : std::filesystem::directory_iterator(dir.path())) pgm += e.path().extension() == ".pgm";
    EXPECT_EQ(pgm, 20);
    for (int i = 0; i < 10; ++i) EXPECT_EQ(m.samples[i].index, i);
    const Manifest loaded = load_manifest(dir / "manifest.json");
    EXPECT_EQ(manifest_to_json(loaded), manifest_to_json(m));
    EXPECT_EQ(m.samples[4].image_checksum, file_checksum(dir / m.samples[4].image));
}

TEST(GenerateDataset, RegenerationIsByteIdentical) {
    TempDir a;
    TempDir b;
    SceneSpec spec;
    spec.seed = 9;
    generate_dataset(spec, 6, a.path());
    generate_dataset(spec, 6, b.path());
    for (const auto& e : std::filesystem::directory_iterator(a.path())) {
        EXPECT_EQ(read_bytes(e.path()), read_bytes(b.path() / e.path().filename())) << e.path();
    }
}

TEST(GenerateDataset, EmptyAndUnwritable) {
    TempDir dir;
    const Manifest m = generate_dataset(SceneSpec{}, 0, dir.path());
    EXPECT_TRUE(m.samples.empty());
    int files = 0;
    for (const auto& e : std::filesystem::directory_iterator(dir.path())) files += e.path().extension() == ".pgm";
    EXPECT_EQ(files, 0);
    testing_support::write_text(dir / "plain_file", "x");
    EXPECT_THROW(generate_dataset(SceneSpec{}, 2, dir / "plain_file" / "sub"), IoError);
}

TEST(RenderSquares, Centers) {
    const LabelMask m = render_squares(10, 10, {{2, 2}, {7, 7}}, 3);
    EXPECT_EQ(m.foreground_count(), 18u);
    EXPECT_EQ(m.at(1, 1), 1);
    EXPECT_EQ(m.at(3, 3), 1);
    EXPECT_EQ(m.at(4, 4), 0);
}
