#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "hlchoice/neuralnet.hpp"

namespace hlchoice::explain {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Batched model under explanation: d x m inputs -> k x m outputs.
using ModelFn = std::function<Matrix(const Matrix&)>;

/// Rows that stand in for "absent" features.
class BackgroundSet {
public:
    enum class Mode : std::uint8_t { MeanVector, SampleSet };

    /// Single synthetic row holding the column means of `rows` (d x m).
    static BackgroundSet mean_of(const Matrix& rows);
    /// Every column of `rows` is kept; coalition values average over them.
    static BackgroundSet sample_set(const Matrix& rows);

    Mode mode() const { return mode_; }
    const Matrix& rows() const { return rows_; }
    std::size_t width() const { return static_cast<std::size_t>(rows_.rows()); }

private:
    BackgroundSet(Mode mode, Matrix rows);
    Mode mode_;
    Matrix rows_;
};

/// Which scalar of the classifier is attributed.
enum class OutputMode : std::uint8_t { Probability, Logit };

/// The classifier (optionally preceded by an autoencoder) as a function of the
/// 18 scaled features. With an autoencoder the encoder is part of the function,
/// so attributions stay over the original features.
ModelFn classifier_fn(const nn::Network& classifier, const nn::Network* ae = nullptr,
                      nn::AeFeed feed = nn::AeFeed::Latent, OutputMode mode = OutputMode::Probability);

/// Attribution of one output for one instance.
struct Attribution {
    std::vector<std::string> feature_names;
    std::vector<double> phi;
    std::vector<double> std_error;  // empty for exact attributions
    double base_value = 0.0;
    double fx = 0.0;
    std::size_t explained_class = 0;

    /// |sum(phi) + base - fx|
    double efficiency_gap() const;
};

/// Shapley values of every output at once.
struct ShapleyResult {
    Matrix phi;        // d x k
    Matrix std_error;  // d x k, empty for exact
    Vector base;       // k, value of the empty coalition
    Vector fx;         // k, value of the full coalition

    Attribution for_class(std::size_t c, std::span<const std::string> names) const;
};

struct ExactOptions {
    std::size_t exact_limit = 12;
    /// Permit d above the limit (2^d coalitions).
    bool allow_over_limit = false;
};

/// Full coalition enumeration. Throws ConfigError when d exceeds the limit
/// without the override.
ShapleyResult exact_shapley(const ModelFn& model, std::span<const double> x, const BackgroundSet& background,
                            const ExactOptions& options = {});

Attribution exact_shapley(const ModelFn& model, std::span<const double> x, const BackgroundSet& background,
                          std::size_t explained_class, std::span<const std::string> names,
                          const ExactOptions& options = {});

/// Average of marginal contributions along the given feature orderings.
ShapleyResult permutation_shapley(const ModelFn& model, std::span<const double> x, const BackgroundSet& background,
                                  std::span<const std::vector<std::size_t>> permutations);

/// Monte-Carlo estimate over `n_permutations` seeded random orderings. Reports
/// the standard error of each estimate.
ShapleyResult sampled_shapley(const ModelFn& model, std::span<const double> x, const BackgroundSet& background,
                              std::size_t n_permutations, std::uint64_t seed);

Attribution sampled_shapley(const ModelFn& model, std::span<const double> x, const BackgroundSet& background,
                            std::size_t explained_class, std::span<const std::string> names,
                            std::size_t n_permutations, std::uint64_t seed);

struct Method {
    enum class Kind : std::uint8_t { Exact, Sampled };
    Kind kind = Kind::Sampled;
    std::size_t permutations = 200;
    std::uint64_t seed = 0;
    ExactOptions exact;
};

struct GlobalImportance {
    std::vector<std::string> feature_names;
    Matrix per_class;  // d x k, mean |phi| per class
    Vector overall;    // d, class-averaged mean |phi|
    std::vector<std::size_t> ranking;  // descending overall; ties by declaration order

    /// Rank table: rank, feature, overall, then one column per class.
    void write_csv(std::ostream& out, std::span<const std::string> class_names, std::string_view comment = {}) const;
};

/// Mean |phi| over the columns of `rows` (d x n). Throws DataError when empty.
GlobalImportance global_importance(const ModelFn& model, const Matrix& rows, const Method& method,
                                   const BackgroundSet& background, std::span<const std::string> names);

struct Contribution {
    std::string feature;
    double phi = 0.0;
    friend bool operator==(const Contribution&, const Contribution&) = default;
};

/// Force-style decomposition of one attribution.
struct LocalReport {
    std::size_t explained_class = 0;
    double base_value = 0.0;
    double fx = 0.0;
    std::vector<Contribution> positive;  // phi > 0, |phi| descending
    std::vector<Contribution> negative;  // phi < 0, |phi| descending
    double checksum = 0.0;               // base + sum(phi)

    nlohmann::json to_json() const;
    std::string to_text() const;
};

LocalReport local_report(const Attribution& attribution);

nlohmann::json to_json(const Attribution& attribution);

}  // namespace hlchoice::explain
