// Acceptance harness: one PASS/FAIL line per criterion. Tolerances are pinned here.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hlchoice/cli.hpp"
#include "hlchoice/explain.hpp"
#include "hlchoice/features.hpp"
#include "hlchoice/ingest.hpp"
#include "hlchoice/metrics.hpp"
#include "hlchoice/neuralnet.hpp"
#include "hlchoice/pipeline.hpp"
#include "hlchoice/rng.hpp"
#include "hlchoice/synthgen.hpp"

#include "../oracles/continuity_oracle.hpp"
#include "../oracles/metrics_oracle.hpp"
#include "../oracles/nn_oracle.hpp"
#include "../oracles/shapley_oracle.hpp"

namespace fs = std::filesystem;
using namespace hlchoice;

namespace {

constexpr double kContinuityTol = 1e-10;
constexpr double kContinuitySeconds = 10.0;
constexpr double kGradientTol = 1e-4;
constexpr double kGradientSeconds = 30.0;
constexpr double kEfficiencyTol = 1e-6;
constexpr double kAxiomTol = 1e-12;
constexpr double kAllPermutationsTol = 1e-12;
constexpr double kSampledRelMae = 0.05;
constexpr double kWorkedExampleTol = 5e-5;
constexpr double kMinSignalAuc = 0.85;
constexpr double kAeAucBand = 0.05;
constexpr double kEndToEndSeconds = 600.0;
constexpr std::size_t kTopK = 3;
constexpr double kNullLow = 0.45;
constexpr double kNullHigh = 0.55;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
    if (!ok) ++failures;
    std::cout << (ok ? "PASS" : "FAIL") << "  [" << id << "] " << name << ": " << detail << std::endl;
}

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(4);
    s << v;
    return s.str();
}

nlohmann::json read_json(const fs::path& p) {
    std::ifstream in(p);
    return nlohmann::json::parse(in);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    if (code != 0) std::cerr << "command failed (" << code << "): " << args.front() << "\n" << err.str();
    return code;
}

// ---------------------------------------------------------------------------

void continuity_suite() {
    const auto t0 = Clock::now();
    Rng rng(2024);
    double worst = 0.0;
    bool invariants = true;
    for (int t = 0; t < 10000; ++t) {
        const auto n = 1 + rng.index(8);
        const auto k = 1 + rng.index(4);
        std::vector<std::string> seq;
        for (std::uint64_t i = 0; i < n; ++i) seq.push_back("H" + std::to_string(rng.index(k)));
        const features::VisitSequence vs("p", seq);
        const auto got = features::continuity_indices(vs);
        const auto want = oracle::continuity(seq);
        worst = std::max({worst, std::abs(got.upc - want.upc), std::abs(got.lupc - want.lupc),
                          std::abs(got.secoc - want.secoc), std::abs(got.coci - want.coci)});
        const double distinct = static_cast<double>(vs.distinct());
        for (double v : {got.upc, got.lupc, got.secoc, got.coci}) invariants &= v >= 0.0 && v <= 1.0;
        invariants &= got.upc >= got.lupc && got.upc >= 1.0 / distinct - 1e-15;
        if (vs.distinct() == 1) invariants &= got.upc == 1.0 && got.secoc == 1.0 && got.coci == 1.0;
        if (seq.size() >= 2 && vs.distinct() == seq.size()) invariants &= got.coci == 0.0 && got.secoc == 0.0;
    }
    const double secs = seconds_since(t0);
    report(1, "continuity indices vs oracle", worst <= kContinuityTol && invariants && secs < kContinuitySeconds,
           "max |diff| " + fmt(worst) + ", invariants " + (invariants ? "hold" : "violated") + ", " + fmt(secs) +
               " s");
}

// ---------------------------------------------------------------------------

double max_rel_error(const nn::Network& net, const nn::Matrix& x, const nn::Matrix& t, nn::LossKind kind) {
    const auto g = nn::backprop(net, x, t, kind);
    std::vector<std::vector<double>> xs, ts;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        xs.emplace_back(x.col(j).data(), x.col(j).data() + x.rows());
        ts.emplace_back(t.col(j).data(), t.col(j).data() + t.rows());
    }
    std::vector<oracle::Layer> ref;
    for (const auto& l : net.layers()) {
        oracle::Layer o;
        o.w.assign(l.weights.rows(), std::vector<double>(l.weights.cols()));
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weights.cols(); ++c) o.w[r][c] = l.weights(r, c);
        }
        o.b.assign(l.biases.data(), l.biases.data() + l.biases.size());
        o.act = l.activation == nn::Activation::Relu      ? oracle::Act::Relu
                : l.activation == nn::Activation::Sigmoid ? oracle::Act::Sigmoid
                : l.activation == nn::Activation::Softmax ? oracle::Act::Softmax
                                                          : oracle::Act::Identity;
        ref.push_back(std::move(o));
    }
    const auto numeric = oracle::numeric_gradient(ref, xs, ts, 1e-5);
    std::size_t k = 0;
    double worst = 0.0;
    auto visit = [&](double a) {
        const double n = numeric[k++];
        worst = std::max(worst, std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8}));
    };
    for (std::size_t l = 0; l < g.weights.size(); ++l) {
        for (Eigen::Index r = 0; r < g.weights[l].rows(); ++r) {
            for (Eigen::Index c = 0; c < g.weights[l].cols(); ++c) visit(g.weights[l](r, c));
        }
        for (Eigen::Index r = 0; r < g.biases[l].size(); ++r) visit(g.biases[l](r));
    }
    return worst;
}

void gradient_suite() {
    const auto t0 = Clock::now();
    double worst_clf = 0.0;
    double worst_ae = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed * 101);
        nn::Matrix x(18, 8);
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform();
        std::vector<int> labels(8);
        for (auto& l : labels) l = static_cast<int>(rng.index(4));

        auto clf = nn::make_classifier({{18, 8, 4}});
        nn::initialize(clf, seed);
        worst_clf = std::max(worst_clf, max_rel_error(clf, x, nn::one_hot(labels, 4), nn::LossKind::CrossEntropy));

        auto ae = nn::make_autoencoder({{18, 20, 8}, {8, 20, 18}});
        nn::initialize(ae, seed);
        worst_ae = std::max(worst_ae, max_rel_error(ae, x, x, nn::LossKind::SquaredError));
    }
    const double secs = seconds_since(t0);
    report(2, "backprop vs central differences",
           worst_clf < kGradientTol && worst_ae < kGradientTol && secs < kGradientSeconds,
           "18-8-4 max rel " + fmt(worst_clf) + ", 18-20-8-20-18 max rel " + fmt(worst_ae) + ", " + fmt(secs) + " s");
}

// ---------------------------------------------------------------------------

explain::ModelFn random_mlp(std::size_t d, std::uint64_t seed) {
    auto net = nn::make_classifier({{d, 8, 4}});
    nn::initialize(net, seed);
    return [net](const explain::Matrix& x) { return net.forward(x); };
}

explain::Matrix random_rows(std::size_t d, std::size_t n, Rng& rng) {
    explain::Matrix m(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform();
    return m;
}

void shapley_suite() {
    Rng rng(77);

    double worst_eff = 0.0;
    for (int t = 0; t < 100; ++t) {
        const std::size_t d = 2 + rng.index(11);
        const auto model = random_mlp(d, 1000 + t);
        const auto bg = explain::BackgroundSet::mean_of(random_rows(d, 10, rng));
        const auto x = random_rows(d, 1, rng);
        const auto r = explain::exact_shapley(model, std::span<const double>(x.data(), d), bg);
        for (Eigen::Index c = 0; c < r.phi.cols(); ++c) {
            worst_eff = std::max(worst_eff, std::abs(r.phi.col(c).sum() + r.base(c) - r.fx(c)));
        }
    }

    // Dummy: feature 2 is never read. Symmetry: features 0 and 1 enter symmetrically.
    const explain::ModelFn constructed = [](const explain::Matrix& x) {
        explain::Matrix out(1, x.cols());
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            const double a = x(0, j), b = x(1, j);
            out(0, j) = std::tanh(a + b) + a * b + 0.3 * x(3, j) * x(3, j);
        }
        return out;
    };
    double dummy = 0.0, symmetry = 0.0;
    for (int t = 0; t < 20; ++t) {
        auto x = random_rows(4, 1, rng);
        auto b = random_rows(4, 3, rng);
        x(1, 0) = x(0, 0);
        b.row(1) = b.row(0);
        const auto r =
            explain::exact_shapley(constructed, std::span<const double>(x.data(), 4), explain::BackgroundSet::sample_set(b));
        dummy = std::max(dummy, std::abs(r.phi(2, 0)));
        symmetry = std::max(symmetry, std::abs(r.phi(0, 0) - r.phi(1, 0)));
    }

    // d = 3 with every permutation equals exact enumeration.
    const auto model3 = random_mlp(3, 5);
    const auto bg3 = explain::BackgroundSet::mean_of(random_rows(3, 5, rng));
    const auto x3 = random_rows(3, 1, rng);
    std::vector<std::vector<std::size_t>> perms;
    std::vector<std::size_t> p{0, 1, 2};
    do perms.push_back(p);
    while (std::next_permutation(p.begin(), p.end()));
    const auto all = explain::permutation_shapley(model3, std::span<const double>(x3.data(), 3), bg3, perms);
    const auto ex3 = explain::exact_shapley(model3, std::span<const double>(x3.data(), 3), bg3);
    const double perm_gap = (all.phi - ex3.phi).cwiseAbs().maxCoeff();

    // Oracle cross-check on the d = 3 case (independent coalition sum).
    const oracle::ScalarFn f0 = [&](const std::vector<double>& z) {
        return model3(Eigen::Map<const explain::Matrix>(z.data(), 3, 1))(0, 0);
    };
    const std::vector<double> xv(x3.data(), x3.data() + 3);
    const std::vector<double> bv(bg3.rows().data(), bg3.rows().data() + 3);
    const auto oracle_phi = oracle::shapley(f0, xv, {bv});
    double oracle_gap = 0.0;
    for (int i = 0; i < 3; ++i) oracle_gap = std::max(oracle_gap, std::abs(oracle_phi[i] - ex3.phi(i, 0)));

    // d = 10, 2000 sampled permutations.
    const auto model10 = random_mlp(10, 9);
    const auto bg10 = explain::BackgroundSet::mean_of(random_rows(10, 20, rng));
    const auto x10 = random_rows(10, 1, rng);
    const auto ex10 = explain::exact_shapley(model10, std::span<const double>(x10.data(), 10), bg10);
    const auto s10 = explain::sampled_shapley(model10, std::span<const double>(x10.data(), 10), bg10, 2000, 31);
    const double mae = (s10.phi - ex10.phi).cwiseAbs().mean();
    const double scale = ex10.phi.cwiseAbs().maxCoeff();

    const bool ok = worst_eff <= kEfficiencyTol && dummy <= kAxiomTol && symmetry <= kAxiomTol &&
                    perm_gap <= kAllPermutationsTol && oracle_gap <= kAllPermutationsTol &&
                    mae < kSampledRelMae * scale;
    report(3, "Shapley axioms and estimator", ok,
           "efficiency " + fmt(worst_eff) + ", dummy " + fmt(dummy) + ", symmetry " + fmt(symmetry) +
               ", d=3 all-perm gap " + fmt(perm_gap) + ", oracle gap " + fmt(oracle_gap) + ", d=10 MAE/max " +
               fmt(mae / scale));
}

// ---------------------------------------------------------------------------

void metrics_suite() {
    Rng rng(5150);
    std::size_t mismatches = 0;
    for (int t = 0; t < 1000; ++t) {
        const std::size_t n = 1 + rng.index(30);
        std::vector<int> labels(n), preds(n);
        for (std::size_t i = 0; i < n; ++i) {
            labels[i] = static_cast<int>(rng.index(4));
            preds[i] = static_cast<int>(rng.index(4));
        }
        const auto counts = metrics::confusion_counts(labels, preds);
        for (int c = 0; c < 4; ++c) {
            const auto got = metrics::per_class_metrics(counts.per_class[static_cast<std::size_t>(c)]);
            const auto want = oracle::class_metrics(labels, preds, c);
            mismatches += got.accuracy != want.accuracy || got.sensitivity != want.sensitivity ||
                          got.specificity != want.specificity || got.precision != want.precision ||
                          got.f1 != want.f1;
        }
        const std::size_t np = 1 + rng.index(15), nn_ = 1 + rng.index(15);
        std::vector<double> pos(np), neg(nn_);
        for (auto& v : pos) v = static_cast<double>(rng.index(6)) / 5.0;
        for (auto& v : neg) v = static_cast<double>(rng.index(6)) / 5.0;
        mismatches += metrics::pairwise_auc(pos, neg) != oracle::pairwise_auc(pos, neg);
    }
    const auto w = metrics::per_class_metrics({50, 10, 10, 30});
    const bool worked = std::abs(w.accuracy - 0.80) < kWorkedExampleTol &&
                        std::abs(w.sensitivity - 0.8333) < kWorkedExampleTol &&
                        std::abs(w.specificity - 0.75) < kWorkedExampleTol &&
                        std::abs(w.precision - 0.8333) < kWorkedExampleTol &&
                        std::abs(w.f1 - 0.8333) < kWorkedExampleTol;
    report(4, "metrics exactness", mismatches == 0 && worked,
           std::to_string(mismatches) + " mismatches over 1000 instances, worked example " +
               (worked ? "reproduced" : "wrong") + " (" + fmt(w.accuracy) + "/" + fmt(w.sensitivity) + "/" +
               fmt(w.specificity) + "/" + fmt(w.precision) + "/" + fmt(w.f1) + ")");
}

// ---------------------------------------------------------------------------

bool is_partition(std::vector<std::size_t> a, const std::vector<std::size_t>& b, const std::vector<std::size_t>& all) {
    a.insert(a.end(), b.begin(), b.end());
    std::sort(a.begin(), a.end());
    auto sorted_all = all;
    std::sort(sorted_all.begin(), sorted_all.end());
    return a == sorted_all;
}

std::string sampling_manifest(const std::vector<HospitalLevel>& labels, std::uint64_t seed, bool& ok,
                              std::string& detail) {
    pipeline::SplitSpec spec;
    spec.seed = derive_seed(seed, "split");
    const auto split = pipeline::split_train_test(labels.size(), spec);
    std::vector<std::size_t> all(labels.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    ok &= is_partition(split.train, split.test, all);
    ok &= split.train.size() == static_cast<std::size_t>(std::ceil(0.8 * static_cast<double>(labels.size()) - 1e-9));

    const auto balanced = pipeline::undersample_majority(split.train, labels, derive_seed(seed, "undersample"));
    std::array<std::size_t, kLevelCount> hist{};
    for (auto r : balanced) ++hist[static_cast<std::size_t>(labels[r])];
    ok &= std::all_of(hist.begin(), hist.end(), [&](std::size_t h) { return h == hist[0] && h > 0; });
    ok &= std::includes(split.train.begin(), split.train.end(), balanced.begin(), balanced.end());

    const auto folds = pipeline::make_kfolds(balanced, 5, derive_seed(seed, "folds"));
    std::vector<std::size_t> validation_union;
    for (const auto& f : folds) {
        ok &= is_partition(f.fit, f.validation, balanced);
        validation_union.insert(validation_union.end(), f.validation.begin(), f.validation.end());
    }
    ok &= is_partition(validation_union, {}, balanced);
    detail = "train " + std::to_string(split.train.size()) + " / test " + std::to_string(split.test.size()) +
             ", balanced per class " + std::to_string(hist[0]) + ", 5 folds";
    return pipeline::split_manifest(split, balanced, folds).dump();
}

void sampling_suite() {
    synth::CohortSpec spec;
    spec.n_patients = 1000;
    spec.seed = 3;
    const auto table = features::build_feature_table(synth::generate_cohort(spec).dataset);
    std::vector<HospitalLevel> labels;
    for (const auto& r : table.rows) labels.push_back(r.label);
    bool ok = true;
    std::string detail;
    const auto a = sampling_manifest(labels, 17, ok, detail);
    const auto b = sampling_manifest(labels, 17, ok, detail);
    const bool same = a == b;
    report(5, "sampling protocol", ok && same, detail + ", reruns " + (same ? "byte-identical" : "differ"));
}

// ---------------------------------------------------------------------------

std::vector<std::string> with_common(std::string cmd, const fs::path& dir, std::vector<std::string> extra) {
    std::vector<std::string> args{std::move(cmd)};
    args.insert(args.end(), extra.begin(), extra.end());
    for (const std::string& a : {std::string("-c"), std::string(ACCEPTANCE_CONFIG), std::string("-o"), dir.string()}) {
        args.push_back(a);
    }
    return args;
}

void end_to_end_suite(const fs::path& root) {
    const fs::path dir = root / "planted";
    fs::remove_all(dir);
    const auto t0 = Clock::now();
    bool ran = true;
    for (const auto& step : std::vector<std::vector<std::string>>{{"synth"},
                                                                  {"ingest"},
                                                                  {"features"},
                                                                  {"train", "--no-ae"},
                                                                  {"train", "--ae"},
                                                                  {"evaluate"},
                                                                  {"explain"},
                                                                  {"compare"}}) {
        std::vector<std::string> flags(step.begin() + 1, step.end());
        if (cli(with_common(step.front(), dir, flags)) != 0) {
            ran = false;
            break;
        }
    }
    const double secs = seconds_since(t0);
    if (!ran) {
        report(6, "planted-signal end to end", false, "pipeline command failed");
        report(7, "mfpc in top-3 global importance", false, "pipeline command failed");
        return;
    }
    const double without = read_json(dir / "metrics_noae.json").at("macro").at("auc").get<double>();
    const double with = read_json(dir / "metrics_ae.json").at("macro").at("auc").get<double>();
    report(6, "planted-signal end to end",
           without >= kMinSignalAuc && std::abs(with - without) <= kAeAucBand && secs < kEndToEndSeconds,
           "AUC withoutAE " + fmt(without) + ", withAE " + fmt(with) + " (" +
               (with >= without ? "AE helps" : "AE does not help") + "), " + fmt(secs) + " s");

    std::ifstream csv(dir / "global_importance_noae.csv");
    std::string line;
    std::vector<std::string> top;
    while (std::getline(csv, line) && top.size() < kTopK) {
        if (line.empty() || line[0] == '#' || line.rfind("rank,", 0) == 0) continue;
        const auto a = line.find(',');
        top.push_back(line.substr(a + 1, line.find(',', a + 1) - a - 1));
    }
    const bool found = std::find(top.begin(), top.end(), "mfpc") != top.end();
    std::string listed;
    for (const auto& t : top) listed += (listed.empty() ? "" : ", ") + t;
    report(7, "mfpc in top-3 global importance", found, "top features: " + listed);
}

void null_suite(const fs::path& root) {
    const fs::path dir = root / "null";
    fs::remove_all(dir);
    const std::vector<std::string> zero{"-s", "synth.signal_strength=0"};
    bool ran = true;
    for (const auto& step : std::vector<std::vector<std::string>>{
             {"synth"}, {"ingest"}, {"features"}, {"train", "--no-ae"}, {"evaluate", "--no-ae"}}) {
        std::vector<std::string> flags(step.begin() + 1, step.end());
        flags.insert(flags.end(), zero.begin(), zero.end());
        if (cli(with_common(step.front(), dir, flags)) != 0) {
            ran = false;
            break;
        }
    }
    if (!ran) {
        report(8, "null signal AUC", false, "pipeline command failed");
        return;
    }
    const double auc = read_json(dir / "metrics_noae.json").at("macro").at("auc").get<double>();
    report(8, "null signal AUC", auc >= kNullLow && auc <= kNullHigh, "macro AUC " + fmt(auc));
}

void audit_suite(const fs::path& root) {
    const fs::path dir = root / "dirty";
    fs::remove_all(dir);
    const std::vector<std::string> args{"-o", dir.string(), "-s", "synth.dirty=true", "-s", "synth.n_patients=1000"};
    auto with = [&](std::string cmd) {
        std::vector<std::string> a{std::move(cmd)};
        a.insert(a.end(), args.begin(), args.end());
        return a;
    };
    if (cli(with("synth")) != 0 || cli(with("ingest")) != 0) {
        report(9, "dirty-mode exclusion audit", false, "pipeline command failed");
        return;
    }
    const auto expected = ingest::audit_from_json(read_json(dir / "cohort" / "expected_audit.json"));
    const auto got = ingest::audit_from_json(read_json(dir / "audit.json").at("audit"));
    std::string detail;
    for (auto r : kAllReasons) {
        detail += (detail.empty() ? "" : ", ") + std::string(reason_name(r)) + " " + std::to_string(got[r]) + "/" +
                  std::to_string(expected[r]);
    }
    report(9, "dirty-mode exclusion audit", got == expected && !expected.all_zero(), detail);
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::current_path() / "acceptance_runs";
    fs::create_directories(root);
    continuity_suite();
    gradient_suite();
    shapley_suite();
    metrics_suite();
    sampling_suite();
    end_to_end_suite(root);
    null_suite(root);
    audit_suite(root);
    std::cout << (failures == 0 ? "ALL CRITERIA PASS" : std::to_string(failures) + " CRITERIA FAIL") << std::endl;
    return failures == 0 ? 0 : 1;
}
