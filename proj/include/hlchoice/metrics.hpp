#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "hlchoice/domain.hpp"

namespace hlchoice::metrics {

/// One-vs-rest tallies for a single class.
struct ClassCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    std::size_t total() const { return tp + fp + fn + tn; }
    friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

struct ConfusionCounts {
    std::array<ClassCounts, kLevelCount> per_class{};
    std::size_t n = 0;
    std::size_t correct = 0;
};

/// Labels and predictions are class codes 0-3. Throws DataError on length
/// mismatch, empty input or an out-of-range code.
ConfusionCounts confusion_counts(std::span<const int> labels, std::span<const int> predictions);

/// Degenerate denominators resolve to 0 and are listed in `flags`.
struct ClassMetrics {
    double accuracy = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
    double precision = 0.0;
    double f1 = 0.0;
    std::vector<std::string> flags;
};

ClassMetrics per_class_metrics(const ClassCounts& counts);

/// Unweighted mean of each metric; flags are concatenated.
ClassMetrics macro_metrics(std::span<const ClassMetrics> per_class);

/// Mann-Whitney statistic: P(pos > neg) + 0.5 P(pos = neg). Requires both sides nonempty.
double pairwise_auc(std::span<const double> positive_scores, std::span<const double> negative_scores);

struct AucResult {
    std::array<std::optional<double>, kLevelCount> per_class{};
    double macro = 0.0;
    std::vector<std::string> warnings;
};

/// One-vs-rest AUC per class from a 4 x n probability matrix. Classes lacking
/// positives or negatives are left out of the macro with a warning.
AucResult auc_ovr(std::span<const int> labels, const Eigen::MatrixXd& probabilities);

struct MetricReport {
    std::string variant;  // "withoutAE" or "withAE"
    std::array<ClassMetrics, kLevelCount> per_class;
    std::array<std::optional<double>, kLevelCount> per_class_auc{};
    ClassMetrics macro;
    double macro_auc = 0.0;
    double multiclass_accuracy = 0.0;
    std::size_t n = 0;
    std::vector<std::string> warnings;

    nlohmann::json to_json() const;
    static MetricReport from_json(const nlohmann::json& j);
};

/// Predictions are the argmax of each probability column.
MetricReport evaluate(std::span<const int> labels, const Eigen::MatrixXd& probabilities, std::string variant);

/// Comparison table with rows AUC, Accuracy, F1, Precision, Sensitivity,
/// Specificity and columns withoutAE, withAE, increase (macro values).
void write_comparison_table(std::ostream& out, const MetricReport& without_ae, const MetricReport& with_ae,
                            std::string_view comment = {});

}  // namespace hlchoice::metrics
