#include <gtest/gtest.h>

#include <numeric>
#include <set>

#include "canekit/curation.hpp"
#include "canekit/md5.hpp"
#include "canekit/preprocess.hpp"
#include "support/fixtures.hpp"

using namespace canekit;
using namespace canekit::curation;

namespace {

std::span<const std::uint8_t> bytes_of(std::string_view s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

Image gradient_image(bool rising) {
    Image img(32, 16, 3);
    for (std::size_t y = 0; y < 16; ++y)
        for (std::size_t x = 0; x < 32; ++x)
            for (std::size_t c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<std::uint8_t>(rising ? x * 8 : 255 - x * 8);
    return img;
}

}  // namespace

TEST(Md5, KnownVectors) {
    EXPECT_EQ(md5_hex(bytes_of("")), "d41d8cd98f00b204e9800998ecf8427e");
    EXPECT_EQ(md5_hex(bytes_of("abc")), "900150983cd24fb0d6963f7d28e17f72");
    EXPECT_EQ(md5_hex(bytes_of("The quick brown fox jumps over the lazy dog")), "9e107d9d372bb6826bd81d3542a419d6");
}

TEST(DHash, SolidImageIsZero) {
    EXPECT_EQ(phash64(Image(50, 40, 3, 77)), 0u);
    EXPECT_EQ(phash64(Image(9, 8, 3, 0)), 0u);
}

TEST(DHash, GradientAndInverseDifferInEveryBit) {
    const auto up = phash64(gradient_image(true)), down = phash64(gradient_image(false));
    EXPECT_EQ(up, 0u);
    EXPECT_EQ(down, ~0ull);
    EXPECT_EQ(hamming(up, down), 64);
}

TEST(DHash, FixtureImagesCarryTheirBits) {
    for (std::uint64_t bits : {fixture::kBaseHash, fixture::kBaseHash ^ fixture::kNearMask, ~fixture::kBaseHash}) {
        EXPECT_EQ(phash64(fixture::image_with_dhash(bits)), bits);
        EXPECT_EQ(phash64_bytes(encode_png(fixture::image_with_dhash(bits))), bits);
    }
    EXPECT_EQ(hamming(fixture::kBaseHash, fixture::kBaseHash ^ fixture::kNearMask), 4);
    EXPECT_EQ(hamming(fixture::kBaseHash, fixture::kBaseHash ^ fixture::kFarMask), 6);
}

TEST(DHash, UndecodableBytesRaise) {
    const std::vector<std::uint8_t> junk{0, 1, 2, 3, 4};
    EXPECT_THROW(phash64_bytes(junk), FormatError);
}

TEST(Dedup, FixtureRemovesExactAndNear) {
    fixture::TempDir dir("dedup");
    fixture::write_dedup_corpus(dir.path());
    const Corpus corpus = scan_corpus(dir.path());
    ASSERT_EQ(corpus.entries.size(), 5u);
    const DedupResult r = dedup(corpus.entries);
    ASSERT_EQ(r.removals.size(), 2u);
    EXPECT_EQ(r.exact_count(), 1u);
    EXPECT_EQ(r.near_count(), 1u);
    EXPECT_TRUE(r.removals[0].path.ends_with("f2.png"));
    EXPECT_TRUE(r.removals[0].matched.ends_with("f1.png"));
    EXPECT_TRUE(r.removals[1].path.ends_with("f3.png"));
    EXPECT_EQ(r.removals[1].distance, 4);
    std::set<std::string> kept;
    for (const auto& e : r.survivors) kept.insert(fs::path(e.path).filename().string());
    EXPECT_EQ(kept, (std::set<std::string>{"f1.png", "f4.png", "f5.png"}));

    const std::string csv = removal_report_csv(r);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "path,class,kind,matched,distance");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

TEST(Dedup, IsIdempotent) {
    fixture::TempDir dir("dedup2");
    fixture::write_dedup_corpus(dir.path());
    const DedupResult once = dedup(scan_corpus(dir.path()).entries);
    const DedupResult twice = dedup(once.survivors);
    EXPECT_TRUE(twice.removals.empty());
    EXPECT_EQ(twice.survivors.size(), once.survivors.size());
}

TEST(Dedup, RunsAcrossClassesAndThresholdIsInclusive) {
    std::vector<CorpusEntry> entries(3);
    entries[0] = {"a/x.png", "A", md5(bytes_of("1")), 0, Role::Unassigned, {}};
    entries[1] = {"b/y.png", "B", md5(bytes_of("2")), 0x1Full, Role::Unassigned, {}};   // 5 bits
    entries[2] = {"c/z.png", "C", md5(bytes_of("3")), 0x3Full, Role::Unassigned, {}};   // 6 bits from x, 1 from y
    const DedupResult r = dedup(entries);
    ASSERT_EQ(r.removals.size(), 1u);
    EXPECT_EQ(r.removals[0].path, "b/y.png");
    EXPECT_EQ(r.removals[0].distance, 5);
    EXPECT_EQ(r.survivors.size(), 2u);
}

TEST(Scan, SkipsUndecodableAndNonImages) {
    fixture::TempDir dir("scan");
    fs::create_directories(dir.path() / "Rust");
    write_file(dir.path() / "Rust" / "ok.png", encode_png(Image(12, 12, 3, 90)));
    write_file(dir.path() / "Rust" / "bad.jpg", std::vector<std::uint8_t>{1, 2, 3});
    write_file(dir.path() / "Rust" / "notes.txt", std::vector<std::uint8_t>{'x'});
    const Corpus c = scan_corpus(dir.path());
    EXPECT_EQ(c.entries.size(), 1u);
    ASSERT_EQ(c.skipped.size(), 1u);
    EXPECT_TRUE(c.skipped[0].path.ends_with("bad.jpg"));
    EXPECT_THROW(scan_corpus(dir.path() / "missing"), IoError);
}

TEST(Rename, SequentialPerClassNames) {
    std::vector<CorpusEntry> e(4);
    e[0].path = "root/Red Rot/b.JPG";
    e[0].label = "Red Rot";
    e[1].path = "root/Red Rot/a.jpeg";
    e[1].label = "Red Rot";
    e[2].path = "root/Smut/z.png";
    e[2].label = "Smut";
    e[3].path = "root/Red Rot/c";
    e[3].label = "Red Rot";
    const auto out = rename_normalize(e);
    ASSERT_EQ(out.size(), 4u);
    EXPECT_EQ(out[0].old_path, "root/Red Rot/a.jpeg");
    EXPECT_EQ(out[0].new_name, "RedRot_0001.jpg");
    EXPECT_EQ(out[1].new_name, "RedRot_0002.jpg");
    EXPECT_EQ(out[2].new_name, "RedRot_0003.jpg");
    EXPECT_EQ(out[3].new_name, "Smut_0001.png");

    const auto back = parse_manifest_csv(manifest_csv(out));
    ASSERT_EQ(back.size(), out.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        EXPECT_EQ(back[i].old_path, out[i].old_path);
        EXPECT_EQ(back[i].label, out[i].label);
        EXPECT_EQ(back[i].new_name, out[i].new_name);
    }
}

TEST(Rename, CollidingStemsRaise) {
    std::vector<CorpusEntry> e(2);
    e[0].path = "r/Red Rot/a.png";
    e[0].label = "Red Rot";
    e[1].path = "r/RedRot/a.png";
    e[1].label = "RedRot";
    EXPECT_THROW(rename_normalize(e), ConsistencyError);
}

TEST(Split, FloorOfEightyPercent) {
    EXPECT_EQ(split_counts(75).train, 60u);
    EXPECT_EQ(split_counts(75).test, 15u);
    EXPECT_EQ(split_counts(1131).train, 904u);
    EXPECT_EQ(split_counts(1131).test, 227u);
    EXPECT_EQ(split_counts(10).train, 8u);
    EXPECT_EQ(split_counts(10).test, 2u);
    EXPECT_EQ(split_counts(0).train, 0u);
    EXPECT_EQ(split_counts(1).train, 0u);
    EXPECT_THROW(split_counts(5, 1.5), ArgumentError);
}

TEST(Split, StratifiedIsSeededAndDisjoint) {
    std::map<std::string, std::vector<std::string>> members;
    for (int i = 0; i < 23; ++i) members["A"].push_back("a" + std::to_string(i));
    for (int i = 0; i < 10; ++i) members["B"].push_back("b" + std::to_string(i));
    const auto s1 = stratified_split(members, 0.8, 7), s2 = stratified_split(members, 0.8, 7);
    const auto s3 = stratified_split(members, 0.8, 8);
    EXPECT_EQ(s1.train, s2.train);
    EXPECT_NE(s1.train, s3.train);
    EXPECT_EQ(s1.train.at("A").size(), 18u);
    EXPECT_EQ(s1.test.at("B").size(), 2u);
    for (const auto& [label, list] : members) {
        std::set<std::string> all(s1.train.at(label).begin(), s1.train.at(label).end());
        for (const auto& p : s1.test.at(label)) EXPECT_TRUE(all.insert(p).second);
        EXPECT_EQ(all.size(), list.size());
    }
    // Input order does not matter.
    auto shuffled = members;
    std::reverse(shuffled["A"].begin(), shuffled["A"].end());
    EXPECT_EQ(stratified_split(shuffled, 0.8, 7).train, s1.train);
}

TEST(Plan, TierBoundaries) {
    EXPECT_EQ(augmentation_factor(0), 6u);
    EXPECT_EQ(augmentation_factor(99), 6u);
    EXPECT_EQ(augmentation_factor(100), 4u);
    EXPECT_EQ(augmentation_factor(199), 4u);
    EXPECT_EQ(augmentation_factor(200), 3u);
    EXPECT_EQ(augmentation_factor(249), 3u);
    EXPECT_EQ(augmentation_factor(250), 2u);
    EXPECT_EQ(augmentation_factor(399), 2u);
    EXPECT_EQ(augmentation_factor(400), 1u);
    EXPECT_EQ(augmentation_factor(499), 1u);
    EXPECT_EQ(augmentation_factor(500), 0u);
}

TEST(Plan, ReproducesPublishedTable) {
    const CurationPlan plan = augmentation_plan(fixture::published_originals());
    ASSERT_EQ(plan.rows.size(), fixture::kPublishedPlan.size());
    for (std::size_t i = 0; i < plan.rows.size(); ++i) {
        const auto& want = fixture::kPublishedPlan[i];
        EXPECT_EQ(plan.rows[i].train, want.train) << want.label;
        EXPECT_EQ(plan.rows[i].factor, want.factor) << want.label;
        EXPECT_EQ(plan.rows[i].final_train, want.final_train) << want.label;
    }
    EXPECT_EQ(plan.total(&PlanRow::original), 7037u);
    EXPECT_EQ(plan.total(&PlanRow::train), 5623u);
    EXPECT_EQ(plan.total(&PlanRow::test), 1414u);
    // The per-class rows sum to 11314 (5691 added images); the printed
    // grand total of 11313 is one short of its own rows.
    std::size_t row_sum = 0;
    for (const auto& r : fixture::kPublishedPlan) row_sum += r.final_train;
    EXPECT_EQ(plan.total(&PlanRow::final_train), row_sum);
    EXPECT_EQ(plan.total(&PlanRow::final_train) - plan.total(&PlanRow::train), 5691u);
    EXPECT_NEAR(plan.original_imbalance(), 26.30, 0.005);
    EXPECT_NEAR(plan.final_imbalance(), 3.80, 0.005);

    const auto j = plan_to_json(plan);
    EXPECT_EQ(j["totals"]["augmented"], 5691);
    EXPECT_EQ(j["classes"].size(), 17u);
}

TEST(Augment, DeterministicAndSized) {
    const Image leaf = fixture::synthetic_leaf(64, 48);
    const auto a = apply_augmentations(leaf, 6, 11, 3, 64);
    const auto b = apply_augmentations(leaf, 6, 11, 3, 64);
    const auto c = apply_augmentations(leaf, 6, 12, 3, 64);
    ASSERT_EQ(a.size(), 6u);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    for (const auto& img : a) {
        EXPECT_EQ(img.width, 64u);
        EXPECT_EQ(img.height, 64u);
    }
    EXPECT_TRUE(apply_augmentations(leaf, 0, 11).empty());
    EXPECT_EQ(apply_augmentations(leaf, 2, 11).front().width, 224u);
}

TEST(Augment, FirstSixOpsAreDistinctKinds) {
    for (std::uint64_t id = 0; id < 20; ++id) {
        std::set<AugKind> kinds;
        for (std::size_t i = 0; i < 6; ++i) kinds.insert(augmentation_op(id, i, 5).kind);
        EXPECT_EQ(kinds.size(), 6u);
    }
}

TEST(Augment, OpInvariants) {
    Rng rng(3);
    Tensor t({1, 3, 10, 10});
    for (float& v : t.data()) v = static_cast<float>(rng.uniform());
    const Tensor flipped = apply_op(apply_op(t, {AugKind::HorizontalFlip}), {AugKind::HorizontalFlip});
    EXPECT_TRUE(std::ranges::equal(flipped.data(), t.data()));
    const Tensor vflip = apply_op(t, {AugKind::VerticalFlip});
    EXPECT_EQ(vflip.at(0, 1, 0, 4), t.at(0, 1, 9, 4));
    const Tensor unit = apply_op(t, {AugKind::Brightness, 1.0});
    EXPECT_TRUE(std::ranges::equal(unit.data(), t.data()));
    const Tensor still = apply_op(t, {AugKind::Rotate, 0.0});
    for (std::size_t i = 0; i < t.numel(); ++i) EXPECT_NEAR(still.data()[i], t.data()[i], 1e-6);
    const Tensor bright = apply_op(t, {AugKind::Brightness, 5.0});
    for (float v : bright.data()) {
        EXPECT_GE(v, 0.0f);
        EXPECT_LE(v, 1.0f);
    }
}

TEST(Preprocess, MidGrayNormalizes) {
    const Tensor gray({1, 3, 224, 224}, std::vector<float>(3 * 224 * 224, 0.5f));
    const Tensor x = preprocess(gray);
    EXPECT_NEAR(x.at(0, 0, 10, 10), (0.5 - 0.485) / 0.229, 1e-6);
    EXPECT_NEAR(x.at(0, 0, 10, 10), 0.0655, 1e-4);
    EXPECT_NEAR(x.at(0, 1, 0, 0), (0.5 - 0.456) / 0.224, 1e-6);
    EXPECT_NEAR(x.at(0, 2, 223, 223), (0.5 - 0.406) / 0.225, 1e-6);
    EXPECT_EQ(preprocess(Image(300, 100, 3, 10)).shape(), (Shape{1, 3, 224, 224}));
}
