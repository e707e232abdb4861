#include "hlchoice/explain.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "hlchoice/csv.hpp"
#include "hlchoice/error.hpp"
#include "hlchoice/rng.hpp"

namespace hlchoice::explain {

namespace {

constexpr std::size_t kChunkColumns = 16384;

/// v(S) for every mask: the model output averaged over background columns,
/// with the features in S taken from x. Returns k x |masks|.
Matrix coalition_values(const ModelFn& model, std::span<const double> x, const Matrix& bg,
                        std::span<const std::uint64_t> masks) {
    const auto d = static_cast<Eigen::Index>(x.size());
    const auto m = static_cast<std::size_t>(bg.cols());
    const std::size_t per_chunk = std::max<std::size_t>(1, kChunkColumns / m);
    Matrix values;
    for (std::size_t start = 0; start < masks.size(); start += per_chunk) {
        const std::size_t count = std::min(per_chunk, masks.size() - start);
        Matrix z(d, static_cast<Eigen::Index>(count * m));
        for (std::size_t t = 0; t < count; ++t) {
            const std::uint64_t mask = masks[start + t];
            for (std::size_t b = 0; b < m; ++b) {
                auto col = z.col(static_cast<Eigen::Index>(t * m + b));
                col = bg.col(static_cast<Eigen::Index>(b));
                for (Eigen::Index i = 0; i < d; ++i) {
                    if (mask >> i & 1U) col(i) = x[static_cast<std::size_t>(i)];
                }
            }
        }
        const Matrix out = model(z);
        if (values.size() == 0) values.resize(out.rows(), static_cast<Eigen::Index>(masks.size()));
        for (std::size_t t = 0; t < count; ++t) {
            values.col(static_cast<Eigen::Index>(start + t)) =
                out.middleCols(static_cast<Eigen::Index>(t * m), static_cast<Eigen::Index>(m)).rowwise().mean();
        }
    }
    return values;
}

void check_instance(std::span<const double> x, const BackgroundSet& background) {
    if (x.size() != background.width()) throw DataError("instance and background widths differ");
    if (x.empty() || x.size() > 63) throw DataError("feature count must be between 1 and 63");
}

}  // namespace

BackgroundSet::BackgroundSet(Mode mode, Matrix rows) : mode_(mode), rows_(std::move(rows)) {
    if (rows_.cols() == 0 || rows_.rows() == 0) throw DataError("background set must be nonempty");
}

BackgroundSet BackgroundSet::mean_of(const Matrix& rows) {
    if (rows.cols() == 0) throw DataError("background set must be nonempty");
    return BackgroundSet(Mode::MeanVector, rows.rowwise().mean());
}

BackgroundSet BackgroundSet::sample_set(const Matrix& rows) { return BackgroundSet(Mode::SampleSet, rows); }

ModelFn classifier_fn(const nn::Network& classifier, const nn::Network* ae, nn::AeFeed feed, OutputMode mode) {
    if (mode == OutputMode::Probability) {
        return [&classifier, ae, feed](const Matrix& x) { return nn::predict_proba(classifier, x, ae, feed); };
    }
    return [&classifier, ae, feed](const Matrix& x) {
        const Matrix in = nn::classifier_input(x, ae, feed);
        const std::size_t depth = classifier.layers().size();
        const Matrix hidden = classifier.forward_range(in, 0, depth - 1);
        Matrix logits = classifier.layers().back().weights * hidden;
        logits.colwise() += classifier.layers().back().biases;
        return logits;
    };
}

double Attribution::efficiency_gap() const {
    return std::abs(std::accumulate(phi.begin(), phi.end(), 0.0) + base_value - fx);
}

Attribution ShapleyResult::for_class(std::size_t c, std::span<const std::string> names) const {
    if (c >= static_cast<std::size_t>(phi.cols())) throw DataError("explained class out of range");
    const auto ci = static_cast<Eigen::Index>(c);
    Attribution a;
    a.feature_names.assign(names.begin(), names.end());
    if (a.feature_names.size() != static_cast<std::size_t>(phi.rows())) {
        throw DataError("feature name count does not match attribution width");
    }
    a.phi.resize(static_cast<std::size_t>(phi.rows()));
    for (Eigen::Index i = 0; i < phi.rows(); ++i) a.phi[static_cast<std::size_t>(i)] = phi(i, ci);
    if (std_error.size() != 0) {
        a.std_error.resize(a.phi.size());
        for (Eigen::Index i = 0; i < phi.rows(); ++i) a.std_error[static_cast<std::size_t>(i)] = std_error(i, ci);
    }
    a.base_value = base(ci);
    a.fx = fx(ci);
    a.explained_class = c;
    return a;
}

ShapleyResult exact_shapley(const ModelFn& model, std::span<const double> x, const BackgroundSet& background,
                            const ExactOptions& options) {
    check_instance(x, background);
    const std::size_t d = x.size();
    if (d > options.exact_limit && !options.allow_over_limit) {
        throw ConfigError("exact Shapley over " + std::to_string(d) + " features exceeds the limit of " +
                          std::to_string(options.exact_limit) + "; enable the override or use sampling");
    }
    if (d > 30) throw ConfigError("exact Shapley is limited to 30 features");

    const std::uint64_t n_masks = std::uint64_t{1} << d;
    std::vector<std::uint64_t> masks(n_masks);
    std::iota(masks.begin(), masks.end(), std::uint64_t{0});
    const Matrix v = coalition_values(model, x, background.rows(), masks);

    // |S|! (d - |S| - 1)! / d! = 1 / (d * C(d - 1, |S|))
    std::vector<double> weight(d);
    double binom = 1.0;
    for (std::size_t s = 0; s < d; ++s) {
        weight[s] = 1.0 / (static_cast<double>(d) * binom);
        binom = binom * static_cast<double>(d - 1 - s) / static_cast<double>(s + 1);
    }

    ShapleyResult r;
    r.phi = Matrix::Zero(static_cast<Eigen::Index>(d), v.rows());
    for (std::uint64_t mask = 0; mask < n_masks; ++mask) {
        const double w = weight[static_cast<std::size_t>(std::popcount(mask))];
        for (std::size_t i = 0; i < d; ++i) {
            const std::uint64_t bit = std::uint64_t{1} << i;
            if (mask & bit) continue;
            r.phi.row(static_cast<Eigen::Index>(i)) +=
                w * (v.col(static_cast<Eigen::Index>(mask | bit)) - v.col(static_cast<Eigen::Index>(mask))).transpose();
        }
    }
    r.base = v.col(0);
    r.fx = v.col(static_cast<Eigen::Index>(n_masks - 1));
    return r;
}

Attribution exact_shapley(const ModelFn& model, std::span<const double> x, const BackgroundSet& background,
                          std::size_t explained_class, std::span<const std::string> names,
                          const ExactOptions& options) {
    return exact_shapley(model, x, background, options).for_class(explained_class, names);
}

ShapleyResult permutation_shapley(const ModelFn& model, std::span<const double> x, const BackgroundSet& background,
                                  std::span<const std::vector<std::size_t>> permutations) {
    check_instance(x, background);
    if (permutations.empty()) throw DataError("at least one permutation is required");
    const std::size_t d = x.size();
    const auto di = static_cast<Eigen::Index>(d);

    Matrix sum;
    Matrix sum_sq;
    ShapleyResult r;
    constexpr std::size_t kBlock = 64;
    std::vector<std::uint64_t> masks;
    for (std::size_t start = 0; start < permutations.size(); start += kBlock) {
        const std::size_t count = std::min(kBlock, permutations.size() - start);
        masks.clear();
        for (std::size_t p = 0; p < count; ++p) {
            const auto& perm = permutations[start + p];
            if (perm.size() != d) throw DataError("permutation length differs from feature count");
            std::uint64_t mask = 0;
            masks.push_back(mask);
            for (auto f : perm) {
                if (f >= d || (mask >> f & 1U)) throw DataError("invalid feature permutation");
                mask |= std::uint64_t{1} << f;
                masks.push_back(mask);
            }
        }
        const Matrix v = coalition_values(model, x, background.rows(), masks);
        if (sum.size() == 0) {
            sum = Matrix::Zero(di, v.rows());
            sum_sq = Matrix::Zero(di, v.rows());
            r.base = v.col(0);
            r.fx = v.col(di);
        }
        for (std::size_t p = 0; p < count; ++p) {
            const auto& perm = permutations[start + p];
            const auto offset = static_cast<Eigen::Index>(p * (d + 1));
            for (std::size_t j = 0; j < d; ++j) {
                const auto jj = static_cast<Eigen::Index>(j);
                const Vector delta = v.col(offset + jj + 1) - v.col(offset + jj);
                const auto f = static_cast<Eigen::Index>(perm[j]);
                sum.row(f) += delta.transpose();
                sum_sq.row(f) += delta.cwiseAbs2().transpose();
            }
        }
    }
    const double n = static_cast<double>(permutations.size());
    r.phi = sum / n;
    if (permutations.size() > 1) {
        const Matrix var = ((sum_sq - sum.cwiseAbs2() / n) / (n - 1.0)).cwiseMax(0.0);
        r.std_error = (var / n).cwiseSqrt();
    } else {
        r.std_error = Matrix::Zero(sum.rows(), sum.cols());
    }
    return r;
}

ShapleyResult sampled_shapley(const ModelFn& model, std::span<const double> x, const BackgroundSet& background,
                              std::size_t n_permutations, std::uint64_t seed) {
    if (n_permutations == 0) throw ConfigError("n_permutations must be at least 1");
    Rng rng(seed);
    std::vector<std::vector<std::size_t>> perms;
    perms.reserve(n_permutations);
    for (std::size_t p = 0; p < n_permutations; ++p) perms.push_back(rng.permutation(x.size()));
    return permutation_shapley(model, x, background, perms);
}

Attribution sampled_shapley(const ModelFn& model, std::span<const double> x, const BackgroundSet& background,
                            std::size_t explained_class, std::span<const std::string> names,
                            std::size_t n_permutations, std::uint64_t seed) {
    return sampled_shapley(model, x, background, n_permutations, seed).for_class(explained_class, names);
}

GlobalImportance global_importance(const ModelFn& model, const Matrix& rows, const Method& method,
                                   const BackgroundSet& background, std::span<const std::string> names) {
    if (rows.cols() == 0) throw DataError("global importance needs at least one evaluation row");
    GlobalImportance g;
    g.feature_names.assign(names.begin(), names.end());
    std::vector<double> x(static_cast<std::size_t>(rows.rows()));
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
        Eigen::Map<Vector>(x.data(), rows.rows()) = rows.col(j);
        const ShapleyResult r =
            method.kind == Method::Kind::Exact
                ? exact_shapley(model, x, background, method.exact)
                : sampled_shapley(model, x, background, method.permutations,
                                  mix64(method.seed + static_cast<std::uint64_t>(j)));
        if (g.per_class.size() == 0) g.per_class = Matrix::Zero(r.phi.rows(), r.phi.cols());
        g.per_class += r.phi.cwiseAbs();
    }
    g.per_class /= static_cast<double>(rows.cols());
    g.overall = g.per_class.rowwise().mean();
    g.ranking.resize(static_cast<std::size_t>(g.overall.size()));
    std::iota(g.ranking.begin(), g.ranking.end(), std::size_t{0});
    std::stable_sort(g.ranking.begin(), g.ranking.end(), [&](std::size_t a, std::size_t b) {
        return g.overall(static_cast<Eigen::Index>(a)) > g.overall(static_cast<Eigen::Index>(b));
    });
    return g;
}

void GlobalImportance::write_csv(std::ostream& out, std::span<const std::string> class_names,
                                 std::string_view comment) const {
    if (!comment.empty()) out << "# " << comment << '\n';
    out << "rank,feature,mean_abs_phi";
    for (const auto& c : class_names) out << ',' << c;
    out << '\n';
    for (std::size_t r = 0; r < ranking.size(); ++r) {
        const auto i = static_cast<Eigen::Index>(ranking[r]);
        out << r + 1 << ',' << feature_names[ranking[r]] << ',' << csv::format_double(overall(i));
        for (Eigen::Index c = 0; c < per_class.cols(); ++c) out << ',' << csv::format_double(per_class(i, c));
        out << '\n';
    }
}

LocalReport local_report(const Attribution& a) {
    LocalReport r;
    r.explained_class = a.explained_class;
    r.base_value = a.base_value;
    r.fx = a.fx;
    double total = 0.0;
    for (std::size_t i = 0; i < a.phi.size(); ++i) {
        total += a.phi[i];
        if (a.phi[i] > 0.0) r.positive.push_back({a.feature_names[i], a.phi[i]});
        if (a.phi[i] < 0.0) r.negative.push_back({a.feature_names[i], a.phi[i]});
    }
    auto by_magnitude = [](const Contribution& x, const Contribution& y) { return std::abs(x.phi) > std::abs(y.phi); };
    std::stable_sort(r.positive.begin(), r.positive.end(), by_magnitude);
    std::stable_sort(r.negative.begin(), r.negative.end(), by_magnitude);
    r.checksum = a.base_value + total;
    return r;
}

nlohmann::json LocalReport::to_json() const {
    auto block = [](const std::vector<Contribution>& v) {
        nlohmann::json j = nlohmann::json::array();
        for (const auto& c : v) j.push_back({{"feature", c.feature}, {"phi", c.phi}});
        return j;
    };
    return {{"explained_class", explained_class},
            {"base_value", base_value},
            {"fx", fx},
            {"positive", block(positive)},
            {"negative", block(negative)},
            {"checksum", checksum}};
}

std::string LocalReport::to_text() const {
    std::ostringstream out;
    out << "base value " << csv::format_double(base_value) << '\n';
    out << "pushes up:\n";
    for (const auto& c : positive) out << "  " << c.feature << " +" << csv::format_double(c.phi) << '\n';
    out << "pushes down:\n";
    for (const auto& c : negative) out << "  " << c.feature << ' ' << csv::format_double(c.phi) << '\n';
    out << "output " << csv::format_double(fx) << " (base + contributions = " << csv::format_double(checksum)
        << ")\n";
    return out.str();
}

nlohmann::json to_json(const Attribution& a) {
    nlohmann::json features = nlohmann::json::array();
    for (std::size_t i = 0; i < a.phi.size(); ++i) {
        nlohmann::json f{{"feature", a.feature_names[i]}, {"phi", a.phi[i]}};
        if (!a.std_error.empty()) f["std_error"] = a.std_error[i];
        features.push_back(f);
    }
    return {{"explained_class", a.explained_class},
            {"base_value", a.base_value},
            {"fx", a.fx},
            {"features", features}};
}

}  // namespace hlchoice::explain
