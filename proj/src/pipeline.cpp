#include "hlchoice/pipeline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include "hlchoice/error.hpp"
#include "hlchoice/rng.hpp"

namespace hlchoice::pipeline {

void SplitSpec::validate() const {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ConfigError("train_fraction must lie strictly between 0 and 1");
    }
    if (folds < 2) throw ConfigError("folds must be at least 2");
}

namespace {

std::size_t train_size(std::size_t n, double fraction) {
    // The epsilon absorbs representation error such as 0.8 * 5 = 4.000000000000001.
    auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
    return std::min(k, n);
}

}  // namespace

TrainTestSplit split_train_test(std::size_t n_rows, const SplitSpec& spec) {
    spec.validate();
    if (n_rows == 0) throw DataError("cannot split zero rows");
    Rng rng(spec.seed);
    auto order = rng.permutation(n_rows);
    const std::size_t k = train_size(n_rows, spec.train_fraction);
    TrainTestSplit s;
    s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(k), order.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

TrainTestSplit split_train_test_by_group(std::span<const std::string> row_groups, const SplitSpec& spec) {
    spec.validate();
    if (row_groups.empty()) throw DataError("cannot split zero rows");
    std::map<std::string, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < row_groups.size(); ++i) members[row_groups[i]].push_back(i);
    std::vector<const std::vector<std::size_t>*> groups;
    groups.reserve(members.size());
    for (const auto& [g, rows] : members) groups.push_back(&rows);

    Rng rng(spec.seed);
    rng.shuffle(groups);
    const std::size_t k = train_size(row_groups.size(), spec.train_fraction);
    TrainTestSplit s;
    for (const auto* g : groups) {
        auto& side = s.train.size() < k ? s.train : s.test;
        side.insert(side.end(), g->begin(), g->end());
    }
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

std::vector<std::size_t> undersample_majority(std::span<const std::size_t> rows,
                                              std::span<const HospitalLevel> labels, std::uint64_t seed) {
    std::array<std::vector<std::size_t>, kLevelCount> by_class;
    for (auto r : rows) {
        if (r >= labels.size()) throw DataError("row index out of range during undersampling");
        by_class[static_cast<std::size_t>(labels[r])].push_back(r);
    }
    std::size_t minority = rows.size();
    for (std::size_t c = 0; c < kLevelCount; ++c) {
        if (by_class[c].empty()) {
            throw DataError(std::string("class ") + std::string(level_name(static_cast<HospitalLevel>(c))) +
                            " is absent from the training rows");
        }
        minority = std::min(minority, by_class[c].size());
    }
    Rng rng(seed);
    std::vector<std::size_t> out;
    out.reserve(minority * kLevelCount);
    for (auto& members : by_class) {
        rng.shuffle(members);
        out.insert(out.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(minority));
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<Fold> make_kfolds(std::span<const std::size_t> rows, std::size_t folds, std::uint64_t seed) {
    if (folds < 2) throw ConfigError("folds must be at least 2");
    if (folds > rows.size()) {
        throw DataError("cannot draw " + std::to_string(folds) + " folds from " + std::to_string(rows.size()) +
                        " rows");
    }
    std::vector<std::size_t> shuffled(rows.begin(), rows.end());
    Rng rng(seed);
    rng.shuffle(shuffled);

    const std::size_t base = rows.size() / folds;
    const std::size_t extra = rows.size() % folds;
    std::vector<Fold> out(folds);
    std::size_t pos = 0;
    for (std::size_t f = 0; f < folds; ++f) {
        const std::size_t size = base + (f < extra ? 1 : 0);
        auto& fold = out[f];
        fold.validation.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(pos),
                               shuffled.begin() + static_cast<std::ptrdiff_t>(pos + size));
        fold.fit.reserve(rows.size() - size);
        fold.fit.insert(fold.fit.end(), shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(pos));
        fold.fit.insert(fold.fit.end(), shuffled.begin() + static_cast<std::ptrdiff_t>(pos + size), shuffled.end());
        std::sort(fold.validation.begin(), fold.validation.end());
        std::sort(fold.fit.begin(), fold.fit.end());
        pos += size;
    }
    return out;
}

nlohmann::json split_manifest(const TrainTestSplit& split, std::span<const std::size_t> balanced,
                              std::span<const Fold> folds) {
    nlohmann::json j;
    j["train"] = split.train;
    j["test"] = split.test;
    j["balanced_train"] = std::vector<std::size_t>(balanced.begin(), balanced.end());
    nlohmann::json fj = nlohmann::json::array();
    for (const auto& f : folds) fj.push_back({{"fit", f.fit}, {"validation", f.validation}});
    j["folds"] = fj;
    return j;
}

}  // namespace hlchoice::pipeline
