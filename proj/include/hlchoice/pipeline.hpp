#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hlchoice/domain.hpp"

namespace hlchoice::pipeline {

struct SplitSpec {
    std::uint64_t seed = 0;
    double train_fraction = 0.8;
    std::size_t folds = 5;
    /// Keep all visits of a patient on one side of the split.
    bool patient_level = false;

    /// Throws ConfigError unless 0 < train_fraction < 1 and folds >= 2.
    void validate() const;
};

/// Row indices; both sides sorted ascending.
struct TrainTestSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Seeded shuffle of 0..n-1; the first ceil(train_fraction * n) rows train.
TrainTestSplit split_train_test(std::size_t n_rows, const SplitSpec& spec);

/// Patient-level variant: whole groups are assigned in shuffled group order
/// until the training side reaches ceil(train_fraction * n) rows.
TrainTestSplit split_train_test_by_group(std::span<const std::string> row_groups, const SplitSpec& spec);

/// Downsamples every class in `rows` without replacement to the smallest class
/// count. `labels` is indexed by row id. Output is sorted ascending. Throws
/// DataError when some class has no row.
std::vector<std::size_t> undersample_majority(std::span<const std::size_t> rows,
                                              std::span<const HospitalLevel> labels, std::uint64_t seed);

struct Fold {
    std::vector<std::size_t> fit;
    std::vector<std::size_t> validation;
};

/// Shuffled partition into `folds` validation sets whose sizes differ by at most
/// one (the first `n % folds` folds get the extra row). Throws DataError when
/// folds > rows and ConfigError when folds < 2.
std::vector<Fold> make_kfolds(std::span<const std::size_t> rows, std::size_t folds, std::uint64_t seed);

/// Row-index manifest for audit.
nlohmann::json split_manifest(const TrainTestSplit& split, std::span<const std::size_t> balanced,
                              std::span<const Fold> folds);

}  // namespace hlchoice::pipeline
