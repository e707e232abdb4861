#include "hlchoice/metrics.hpp"

#include <algorithm>
#include <ostream>

#include "hlchoice/csv.hpp"
#include "hlchoice/error.hpp"

namespace hlchoice::metrics {

ConfusionCounts confusion_counts(std::span<const int> labels, std::span<const int> predictions) {
    if (labels.size() != predictions.size()) {
        throw DataError("labels (" + std::to_string(labels.size()) + ") and predictions (" +
                        std::to_string(predictions.size()) + ") differ in length");
    }
    if (labels.empty()) throw DataError("confusion counts need at least one sample");
    ConfusionCounts cc;
    cc.n = labels.size();
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int y = labels[i];
        const int p = predictions[i];
        if (y < 0 || y >= static_cast<int>(kLevelCount) || p < 0 || p >= static_cast<int>(kLevelCount)) {
            throw DataError("class code out of range at sample " + std::to_string(i));
        }
        if (y == p) ++cc.correct;
        for (int c = 0; c < static_cast<int>(kLevelCount); ++c) {
            auto& k = cc.per_class[static_cast<std::size_t>(c)];
            const bool actual = y == c;
            const bool predicted = p == c;
            if (actual && predicted) {
                ++k.tp;
            } else if (!actual && predicted) {
                ++k.fp;
            } else if (actual) {
                ++k.fn;
            } else {
                ++k.tn;
            }
        }
    }
    return cc;
}

namespace {

double ratio(std::size_t num, std::size_t den, const char* flag, std::vector<std::string>& flags) {
    if (den == 0) {
        flags.emplace_back(flag);
        return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ClassMetrics per_class_metrics(const ClassCounts& k) {
    ClassMetrics m;
    m.accuracy = ratio(k.tp + k.tn, k.total(), "accuracy_undefined", m.flags);
    m.sensitivity = ratio(k.tp, k.tp + k.fn, "sensitivity_undefined", m.flags);
    m.specificity = ratio(k.tn, k.tn + k.fp, "specificity_undefined", m.flags);
    m.precision = ratio(k.tp, k.tp + k.fp, "precision_undefined", m.flags);
    if (m.precision + m.sensitivity == 0.0) {
        m.flags.emplace_back("f1_undefined");
        m.f1 = 0.0;
    } else {
        m.f1 = 2.0 * (m.precision * m.sensitivity) / (m.precision + m.sensitivity);
    }
    return m;
}

ClassMetrics macro_metrics(std::span<const ClassMetrics> per_class) {
    ClassMetrics m;
    if (per_class.empty()) return m;
    for (const auto& c : per_class) {
        m.accuracy += c.accuracy;
        m.sensitivity += c.sensitivity;
        m.specificity += c.specificity;
        m.precision += c.precision;
        m.f1 += c.f1;
        m.flags.insert(m.flags.end(), c.flags.begin(), c.flags.end());
    }
    const double k = static_cast<double>(per_class.size());
    m.accuracy /= k;
    m.sensitivity /= k;
    m.specificity /= k;
    m.precision /= k;
    m.f1 /= k;
    return m;
}

double pairwise_auc(std::span<const double> positive, std::span<const double> negative) {
    if (positive.empty() || negative.empty()) throw DataError("AUC needs positive and negative samples");
    std::vector<double> neg(negative.begin(), negative.end());
    std::sort(neg.begin(), neg.end());
    // Twice the statistic, kept integral: 2 per correctly ordered pair, 1 per tie.
    unsigned long long twice = 0;
    for (double p : positive) {
        const auto lo = std::lower_bound(neg.begin(), neg.end(), p);
        const auto hi = std::upper_bound(lo, neg.end(), p);
        twice += 2ULL * static_cast<unsigned long long>(lo - neg.begin()) + static_cast<unsigned long long>(hi - lo);
    }
    return static_cast<double>(twice) /
           (2.0 * static_cast<double>(positive.size()) * static_cast<double>(negative.size()));
}

AucResult auc_ovr(std::span<const int> labels, const Eigen::MatrixXd& probabilities) {
    if (probabilities.rows() != static_cast<Eigen::Index>(kLevelCount) ||
        probabilities.cols() != static_cast<Eigen::Index>(labels.size())) {
        throw DataError("probability matrix must be 4 x n with one column per label");
    }
    AucResult r;
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t c = 0; c < kLevelCount; ++c) {
        std::vector<double> pos;
        std::vector<double> neg;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            const double s = probabilities(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(i));
            (labels[i] == static_cast<int>(c) ? pos : neg).push_back(s);
        }
        if (pos.empty() || neg.empty()) {
            r.warnings.push_back("class " + std::string(level_name(static_cast<HospitalLevel>(c))) +
                                 " has no " + (pos.empty() ? "positives" : "negatives") +
                                 "; excluded from macro AUC");
            continue;
        }
        r.per_class[c] = pairwise_auc(pos, neg);
        sum += *r.per_class[c];
        ++used;
    }
    r.macro = used ? sum / static_cast<double>(used) : 0.0;
    return r;
}

MetricReport evaluate(std::span<const int> labels, const Eigen::MatrixXd& probabilities, std::string variant) {
    if (probabilities.cols() != static_cast<Eigen::Index>(labels.size())) {
        throw DataError("probability columns must match label count");
    }
    std::vector<int> predictions(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto col = probabilities.col(static_cast<Eigen::Index>(i));
        std::size_t best = 0;
        for (Eigen::Index c = 1; c < col.size(); ++c) {
            if (col(c) > col(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(c);
        }
        predictions[i] = static_cast<int>(best);
    }
    const auto cc = confusion_counts(labels, predictions);
    MetricReport r;
    r.variant = std::move(variant);
    r.n = cc.n;
    for (std::size_t c = 0; c < kLevelCount; ++c) r.per_class[c] = per_class_metrics(cc.per_class[c]);
    r.macro = macro_metrics(r.per_class);
    r.multiclass_accuracy = static_cast<double>(cc.correct) / static_cast<double>(cc.n);
    auto auc = auc_ovr(labels, probabilities);
    r.per_class_auc = auc.per_class;
    r.macro_auc = auc.macro;
    r.warnings = std::move(auc.warnings);
    return r;
}

namespace {

nlohmann::json metrics_json(const ClassMetrics& m) {
    return {{"accuracy", m.accuracy},       {"sensitivity", m.sensitivity}, {"specificity", m.specificity},
            {"precision", m.precision},     {"f1", m.f1},                   {"flags", m.flags}};
}

ClassMetrics metrics_from(const nlohmann::json& j) {
    ClassMetrics m;
    m.accuracy = j.at("accuracy").get<double>();
    m.sensitivity = j.at("sensitivity").get<double>();
    m.specificity = j.at("specificity").get<double>();
    m.precision = j.at("precision").get<double>();
    m.f1 = j.at("f1").get<double>();
    m.flags = j.value("flags", std::vector<std::string>{});
    return m;
}

}  // namespace

nlohmann::json MetricReport::to_json() const {
    nlohmann::json classes = nlohmann::json::object();
    for (std::size_t c = 0; c < kLevelCount; ++c) {
        auto j = metrics_json(per_class[c]);
        j["auc"] = per_class_auc[c] ? nlohmann::json(*per_class_auc[c]) : nlohmann::json(nullptr);
        classes[std::string(level_name(static_cast<HospitalLevel>(c)))] = j;
    }
    auto macro_j = metrics_json(macro);
    macro_j["auc"] = macro_auc;
    return {{"variant", variant},
            {"n", n},
            {"macro", macro_j},
            {"multiclass_accuracy", multiclass_accuracy},
            {"per_class", classes},
            {"warnings", warnings}};
}

MetricReport MetricReport::from_json(const nlohmann::json& j) {
    MetricReport r;
    r.variant = j.at("variant").get<std::string>();
    r.n = j.at("n").get<std::size_t>();
    r.macro = metrics_from(j.at("macro"));
    r.macro_auc = j.at("macro").at("auc").get<double>();
    r.multiclass_accuracy = j.at("multiclass_accuracy").get<double>();
    for (std::size_t c = 0; c < kLevelCount; ++c) {
        const auto& cj = j.at("per_class").at(std::string(level_name(static_cast<HospitalLevel>(c))));
        r.per_class[c] = metrics_from(cj);
        if (!cj.at("auc").is_null()) r.per_class_auc[c] = cj.at("auc").get<double>();
    }
    r.warnings = j.value("warnings", std::vector<std::string>{});
    return r;
}

void write_comparison_table(std::ostream& out, const MetricReport& without_ae, const MetricReport& with_ae,
                            std::string_view comment) {
    if (!comment.empty()) out << "# " << comment << '\n';
    out << "metric,withoutAE,withAE,increase\n";
    auto row = [&](const char* name, double a, double b) {
        out << name << ',' << csv::format_double(a) << ',' << csv::format_double(b) << ','
            << csv::format_double(b - a) << '\n';
    };
    row("AUC", without_ae.macro_auc, with_ae.macro_auc);
    row("Accuracy", without_ae.macro.accuracy, with_ae.macro.accuracy);
    row("F1", without_ae.macro.f1, with_ae.macro.f1);
    row("Precision", without_ae.macro.precision, with_ae.macro.precision);
    row("Sensitivity", without_ae.macro.sensitivity, with_ae.macro.sensitivity);
    row("Specificity", without_ae.macro.specificity, with_ae.macro.specificity);
}

}  // namespace hlchoice::metrics
