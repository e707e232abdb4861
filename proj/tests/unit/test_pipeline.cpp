#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "hlchoice/error.hpp"
#include "hlchoice/pipeline.hpp"
#include "hlchoice/rng.hpp"

using namespace hlchoice;
using namespace hlchoice::pipeline;

namespace {

std::vector<std::size_t> iota(std::size_t n) {
    std::vector<std::size_t> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = i;
    return v;
}

void expect_partition(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b, std::size_t n) {
    std::vector<std::size_t> all(a);
    all.insert(all.end(), b.begin(), b.end());
    std::sort(all.begin(), all.end());
    EXPECT_EQ(all, iota(n));
}

}  // namespace

TEST(Split, Sizes) {
    SplitSpec spec;
    spec.seed = 3;
    auto s = split_train_test(1000, spec);
    EXPECT_EQ(s.train.size(), 800u);
    EXPECT_EQ(s.test.size(), 200u);
    expect_partition(s.train, s.test, 1000);
    s = split_train_test(5, spec);
    EXPECT_EQ(s.train.size(), 4u);
    EXPECT_EQ(s.test.size(), 1u);
}

TEST(Split, SeedDeterminismAndSensitivity) {
    SplitSpec a;
    a.seed = 11;
    SplitSpec b = a;
    b.seed = 12;
    EXPECT_EQ(split_train_test(500, a).train, split_train_test(500, a).train);
    EXPECT_NE(split_train_test(500, a).train, split_train_test(500, b).train);
}

TEST(Split, UniformInclusion) {
    // Each row should land in train about 80% of the time over many seeds.
    const std::size_t n = 50;
    const std::size_t reps = 4000;
    std::vector<std::size_t> hits(n);
    SplitSpec spec;
    for (std::size_t s = 0; s < reps; ++s) {
        spec.seed = derive_seed(s, "uniform");
        for (auto i : split_train_test(n, spec).train) ++hits[i];
    }
    for (auto h : hits) EXPECT_NEAR(static_cast<double>(h) / reps, 0.8, 0.035);
}

TEST(Split, ByGroupKeepsGroupsTogether) {
    std::vector<std::string> groups;
    for (int g = 0; g < 40; ++g) {
        for (int k = 0; k <= g % 5; ++k) groups.push_back("G" + std::to_string(g));
    }
    SplitSpec spec;
    spec.seed = 5;
    const auto s = split_train_test_by_group(groups, spec);
    expect_partition(s.train, s.test, groups.size());
    std::set<std::string> train_groups;
    for (auto i : s.train) train_groups.insert(groups[i]);
    for (auto i : s.test) EXPECT_FALSE(train_groups.contains(groups[i]));
    EXPECT_GE(s.train.size(), static_cast<std::size_t>(0.8 * static_cast<double>(groups.size())));
    EXPECT_LE(s.train.size(), static_cast<std::size_t>(0.8 * static_cast<double>(groups.size())) + 5);
}

TEST(Split, Errors) {
    SplitSpec spec;
    EXPECT_THROW(split_train_test(0, spec), DataError);
    spec.train_fraction = 1.0;
    EXPECT_THROW(split_train_test(10, spec), ConfigError);
    spec.train_fraction = 0.8;
    spec.folds = 1;
    EXPECT_THROW(spec.validate(), ConfigError);
}

TEST(Undersample, EqualizesToMinority) {
    std::vector<HospitalLevel> labels;
    const std::array<std::size_t, 4> counts{100, 30, 50, 20};
    for (std::size_t c = 0; c < 4; ++c) labels.insert(labels.end(), counts[c], static_cast<HospitalLevel>(c));
    const auto rows = iota(labels.size());
    const auto kept = undersample_majority(rows, labels, 9);
    ASSERT_EQ(kept.size(), 80u);
    std::array<std::size_t, 4> got{};
    for (auto r : kept) ++got[static_cast<std::size_t>(labels[r])];
    for (auto g : got) EXPECT_EQ(g, 20u);
    EXPECT_TRUE(std::is_sorted(kept.begin(), kept.end()));
    EXPECT_EQ(std::set<std::size_t>(kept.begin(), kept.end()).size(), kept.size());
    EXPECT_EQ(undersample_majority(rows, labels, 9), kept);
}

TEST(Undersample, MissingClassFails) {
    const std::vector<HospitalLevel> labels(10, HospitalLevel::Clinic);
    EXPECT_THROW(undersample_majority(iota(10), labels, 1), DataError);
}

TEST(Folds, SizesAndPartition) {
    auto folds = make_kfolds(iota(100), 5, 4);
    ASSERT_EQ(folds.size(), 5u);
    for (const auto& f : folds) {
        EXPECT_EQ(f.validation.size(), 20u);
        expect_partition(f.fit, f.validation, 100);
    }
    folds = make_kfolds(iota(102), 5, 4);
    std::vector<std::size_t> sizes;
    std::vector<std::size_t> all;
    for (const auto& f : folds) {
        sizes.push_back(f.validation.size());
        all.insert(all.end(), f.validation.begin(), f.validation.end());
        expect_partition(f.fit, f.validation, 102);
    }
    EXPECT_EQ(sizes, (std::vector<std::size_t>{21, 21, 20, 20, 20}));
    std::sort(all.begin(), all.end());
    EXPECT_EQ(all, iota(102));
}

TEST(Folds, Errors) {
    EXPECT_THROW(make_kfolds(iota(10), 1, 0), ConfigError);
    EXPECT_THROW(make_kfolds(iota(3), 5, 0), DataError);
}

TEST(Manifest, Layout) {
    SplitSpec spec;
    const auto s = split_train_test(10, spec);
    const auto folds = make_kfolds(s.train, 2, 1);
    const std::vector<std::size_t> balanced{0, 1};
    const auto j = split_manifest(s, balanced, folds);
    EXPECT_EQ(j.at("train").size(), 8u);
    EXPECT_EQ(j.at("test").size(), 2u);
    EXPECT_EQ(j.at("balanced_train"), nlohmann::json({0, 1}));
    ASSERT_EQ(j.at("folds").size(), 2u);
    EXPECT_EQ(j.at("folds")[0].at("validation").size(), 4u);
}
