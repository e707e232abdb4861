#include "hlchoice/cli.hpp"

#include <algorithm>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "hlchoice/csv.hpp"
#include "hlchoice/error.hpp"
#include "hlchoice/features.hpp"
#include "hlchoice/ingest.hpp"
#include "hlchoice/metrics.hpp"
#include "hlchoice/rng.hpp"

namespace hlchoice::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::size_t> parse_sizes(const std::string& text, std::string_view key) {
    std::vector<std::size_t> out;
    for (const auto& f : csv::split(text, ',')) {
        auto v = csv::parse_int(f);
        if (!v || *v <= 0) throw ConfigError("config key '" + std::string(key) + "' expects positive integers");
        out.push_back(static_cast<std::size_t>(*v));
    }
    return out;
}

nn::TrainConfig train_config(const KeyValueConfig& cfg, const std::string& prefix, std::uint64_t seed) {
    nn::TrainConfig t;
    t.learning_rate = cfg.get_double(prefix + ".lr", t.learning_rate);
    const auto batch = cfg.get_int(prefix + ".batch_size", static_cast<long long>(t.batch_size));
    const auto epochs = cfg.get_int(prefix + ".epochs", static_cast<long long>(t.epochs));
    if (!(t.learning_rate > 0.0)) throw ConfigError(prefix + ".lr must be positive");
    if (batch < 1) throw ConfigError(prefix + ".batch_size must be at least 1");
    if (epochs < 0) throw ConfigError(prefix + ".epochs must be nonnegative");
    t.batch_size = static_cast<std::size_t>(batch);
    t.epochs = static_cast<std::size_t>(epochs);
    t.seed = seed;
    return t;
}

}  // namespace

RunConfig RunConfig::from_config(const KeyValueConfig& cfg) {
    RunConfig r;
    r.source = cfg;
    r.seed = cfg.get_u64("seed", r.seed);
    r.out_dir = cfg.get_string("out_dir", r.out_dir.string());
    r.data_dir = cfg.get_string("data_dir", (r.out_dir / "cohort").string());

    KeyValueConfig synth_cfg;
    for (const auto& [k, v] : cfg.values()) {
        if (k.rfind("synth.", 0) == 0) synth_cfg.set(k.substr(6), v);
    }
    if (!synth_cfg.has("seed")) synth_cfg.set("seed", std::to_string(derive_seed(r.seed, "synth")));
    r.cohort = synth::CohortSpec::from_config(synth_cfg);

    r.split.seed = derive_seed(r.seed, "split");
    r.split.train_fraction = cfg.get_double("split.train_fraction", r.split.train_fraction);
    r.split.folds = static_cast<std::size_t>(cfg.get_int("split.folds", static_cast<long long>(r.split.folds)));
    r.split.patient_level = cfg.get_bool("split.patient_level", r.split.patient_level);
    r.split.validate();

    if (auto hidden = cfg.find("mlp.hidden")) {
        r.mlp.layer_sizes = {features::kFeatureCount};
        for (auto h : parse_sizes(*hidden, "mlp.hidden")) r.mlp.layer_sizes.push_back(h);
        r.mlp.layer_sizes.push_back(kLevelCount);
    }
    if (auto enc = cfg.find("ae.encoder")) {
        auto sizes = parse_sizes(*enc, "ae.encoder");
        r.ae.encoder_sizes = {features::kFeatureCount};
        r.ae.encoder_sizes.insert(r.ae.encoder_sizes.end(), sizes.begin(), sizes.end());
        r.ae.decoder_sizes.assign(r.ae.encoder_sizes.rbegin(), r.ae.encoder_sizes.rend());
    }
    r.classifier_train = train_config(cfg, "train", derive_seed(r.seed, "classifier"));
    r.ae_train = train_config(cfg, "ae", derive_seed(r.seed, "autoencoder"));

    auto& e = r.explain;
    const auto method = cfg.get_string("explain.method", "sampled");
    if (method == "exact") {
        e.method.kind = explain::Method::Kind::Exact;
    } else if (method != "sampled") {
        throw ConfigError("explain.method must be exact or sampled, found '" + method + "'");
    }
    e.method.permutations =
        static_cast<std::size_t>(cfg.get_int("explain.permutations", static_cast<long long>(e.method.permutations)));
    e.method.seed = derive_seed(r.seed, "explain");
    e.method.exact.exact_limit =
        static_cast<std::size_t>(cfg.get_int("explain.exact_limit", static_cast<long long>(e.method.exact.exact_limit)));
    e.method.exact.allow_over_limit = cfg.get_bool("explain.allow_over_limit", false);
    const auto output = cfg.get_string("explain.output", "probability");
    if (output == "logit") {
        e.output = explain::OutputMode::Logit;
    } else if (output != "probability") {
        throw ConfigError("explain.output must be probability or logit, found '" + output + "'");
    }
    const auto background = cfg.get_string("explain.background", "mean");
    if (background == "sample") {
        e.sample_background = true;
    } else if (background != "mean") {
        throw ConfigError("explain.background must be mean or sample, found '" + background + "'");
    }
    e.background_size =
        static_cast<std::size_t>(cfg.get_int("explain.background_size", static_cast<long long>(e.background_size)));
    e.rows = static_cast<std::size_t>(cfg.get_int("explain.rows", static_cast<long long>(e.rows)));
    e.local_rows = static_cast<std::size_t>(cfg.get_int("explain.local_rows", static_cast<long long>(e.local_rows)));
    if (e.method.permutations < 1 || e.rows < 1 || e.background_size < 1) {
        throw ConfigError("explain.permutations, explain.rows and explain.background_size must be positive");
    }
    return r;
}

namespace {

struct Variant {
    bool ae;
    const char* tag;     // MetricReport variant
    const char* suffix;  // artifact suffix
};
constexpr Variant kNoAe{false, "withoutAE", "noae"};
constexpr Variant kWithAe{true, "withAE", "ae"};

class Run {
public:
    Run(RunConfig cfg, std::ostream& out) : cfg_(std::move(cfg)), out_(out) {
        fs::create_directories(cfg_.out_dir);
        std::ofstream snap(cfg_.out_dir / "config_snapshot.txt");
        snap << "# config_hash=" << cfg_.hash_hex() << '\n' << cfg_.source.to_text();
    }

    void synth() {
        const auto cohort = synth::generate_cohort(cfg_.cohort);
        synth::write_cohort(cohort, cfg_.cohort, cfg_.data_dir);
        out_ << "synth: " << cohort.dataset.patients.size() << " patients, " << cohort.dataset.visits.size()
             << " visits -> " << cfg_.data_dir.string() << '\n';
    }

    void ingest() {
        const auto loaded = ingest::load_dataset(ingest::DataPaths::in_directory(cfg_.data_dir));
        json j = ingest::audit_to_json(loaded.audit);
        write_json("audit.json", {{"config_hash", cfg_.hash_hex()},
                                  {"audit", j},
                                  {"patients", loaded.dataset.patients.size()},
                                  {"visits", loaded.dataset.visits.size()}});
        out_ << "ingest: " << loaded.dataset.visits.size() << " visits kept, " << loaded.audit.total()
             << " exclusions\n";
    }

    void features() {
        require("audit.json", "ingest");
        const auto loaded = ingest::load_dataset(ingest::DataPaths::in_directory(cfg_.data_dir));
        const auto table = features::build_feature_table(loaded.dataset);
        const std::size_t n = table.rows.size();

        const auto split = cfg_.split.patient_level
                               ? pipeline::split_train_test_by_group(table.patient_ids, cfg_.split)
                               : pipeline::split_train_test(n, cfg_.split);
        std::vector<HospitalLevel> labels(n);
        for (std::size_t i = 0; i < n; ++i) labels[i] = table.rows[i].label;
        const auto balanced = pipeline::undersample_majority(split.train, labels, derive_seed(cfg_.seed, "undersample"));
        const auto folds = pipeline::make_kfolds(balanced, cfg_.split.folds, derive_seed(cfg_.seed, "folds"));

        std::vector<features::VisitFeatureVector> train_rows;
        for (auto i : split.train) train_rows.push_back(table.rows[i]);
        const auto scaler = features::fit_scaler(train_rows);

        features::write_feature_csv(cfg_.out_dir / "features.csv", table.rows, hash_comment());
        json manifest = pipeline::split_manifest(split, balanced, folds);
        manifest["config_hash"] = cfg_.hash_hex();
        write_json("split_manifest.json", manifest);
        json sj = scaler.to_json();
        sj["config_hash"] = cfg_.hash_hex();
        write_json("scaler.json", sj);
        out_ << "features: " << n << " rows, " << split.train.size() << " train / " << split.test.size()
             << " test, balanced pool " << balanced.size() << '\n';
    }

    void train(const Variant& v) {
        const auto data = load_features();
        const auto& pool = data.balanced;
        nn::Matrix x = data.scaled(pool);
        std::vector<int> y = data.labels(pool);

        std::optional<nn::TrainedModel> ae;
        if (v.ae) {
            ae = nn::train_autoencoder(x, cfg_.ae, cfg_.ae_train);
            write_model("ae.json", *ae);
            out_ << "train: autoencoder reconstruction mse " << nn::reconstruction_mse(ae->network, x) << '\n';
            x = nn::encode(ae->network, x);
        }
        nn::MlpConfig mlp = cfg_.mlp;
        mlp.layer_sizes.front() = static_cast<std::size_t>(x.rows());

        json cv = json::array();
        std::vector<metrics::MetricReport> fold_reports;
        for (std::size_t k = 0; k < data.folds.size(); ++k) {
            const auto& fold = data.folds[k];
            auto local = [&](const std::vector<std::size_t>& rows) {
                std::vector<Eigen::Index> cols;
                for (auto r : rows) cols.push_back(data.pool_position(r));
                return cols;
            };
            const auto fit_cols = local(fold.fit);
            const auto val_cols = local(fold.validation);
            nn::Matrix fx = x(Eigen::all, fit_cols);
            nn::Matrix vx = x(Eigen::all, val_cols);
            nn::TrainConfig tc = cfg_.classifier_train;
            tc.seed = derive_seed(tc.seed, "fold" + std::to_string(k));
            const auto model = nn::train_classifier(fx, data.labels(fold.fit), mlp, tc);
            const auto vy = data.labels(fold.validation);
            auto report = metrics::evaluate(vy, model.network.forward(vx), v.tag);
            cv.push_back({{"fold", k}, {"metrics", report.to_json()}});
            fold_reports.push_back(std::move(report));
        }
        double mean_auc = 0.0;
        for (const auto& r : fold_reports) mean_auc += r.macro_auc;
        mean_auc /= static_cast<double>(std::max<std::size_t>(1, fold_reports.size()));
        write_json(std::string("cv_") + v.suffix + ".json",
                   {{"config_hash", cfg_.hash_hex()}, {"variant", v.tag}, {"folds", cv}, {"mean_macro_auc", mean_auc}});

        const auto model = nn::train_classifier(x, y, mlp, cfg_.classifier_train);
        write_model(std::string("model_") + v.suffix + ".json", model);
        out_ << "train " << v.tag << ": cv mean macro AUC " << mean_auc << '\n';
    }

    void evaluate(const Variant& v) {
        const auto data = load_features();
        const auto models = load_models(v);
        const auto proba = nn::predict_proba(models.classifier.network, data.scaled(data.test),
                                             models.ae ? &models.ae->network : nullptr);
        auto report = metrics::evaluate(data.labels(data.test), proba, v.tag);
        json j = report.to_json();
        j["config_hash"] = cfg_.hash_hex();
        write_json(std::string("metrics_") + v.suffix + ".json", j);
        out_ << "evaluate " << v.tag << ": macro AUC " << report.macro_auc << ", macro accuracy "
             << report.macro.accuracy << '\n';
    }

    void explain(const Variant& v) {
        const auto data = load_features();
        const auto models = load_models(v);
        const auto& e = cfg_.explain;
        const nn::Network* ae = models.ae ? &models.ae->network : nullptr;
        const auto model = explain::classifier_fn(models.classifier.network, ae, nn::AeFeed::Latent, e.output);

        const nn::Matrix pool = data.scaled(data.balanced);
        explain::BackgroundSet background = explain::BackgroundSet::mean_of(pool);
        if (e.sample_background) {
            Rng rng(derive_seed(cfg_.seed, "explain.background"));
            auto perm = rng.permutation(data.balanced.size());
            perm.resize(std::min(e.background_size, perm.size()));
            std::sort(perm.begin(), perm.end());
            std::vector<Eigen::Index> cols(perm.begin(), perm.end());
            background = explain::BackgroundSet::sample_set(pool(Eigen::all, cols));
        }

        Rng rng(derive_seed(cfg_.seed, "explain.rows"));
        auto pick = rng.permutation(data.test.size());
        pick.resize(std::min(e.rows, pick.size()));
        std::sort(pick.begin(), pick.end());
        std::vector<std::size_t> rows;
        for (auto p : pick) rows.push_back(data.test[p]);
        const nn::Matrix xs = data.scaled(rows);

        const std::vector<std::string> names(features::kFeatureNames.begin(), features::kFeatureNames.end());
        const auto global = explain::global_importance(model, xs, e.method, background, names);
        std::vector<std::string> classes;
        for (auto l : kAllLevels) classes.emplace_back(level_name(l));
        {
            std::ofstream csv_out(cfg_.out_dir / (std::string("global_importance_") + v.suffix + ".csv"));
            global.write_csv(csv_out, classes, hash_comment());
            if (!csv_out) throw Error("failed writing global importance table");
        }

        json locals = json::array();
        for (std::size_t k = 0; k < std::min(e.local_rows, rows.size()); ++k) {
            std::vector<double> x(xs.col(static_cast<Eigen::Index>(k)).data(),
                                  xs.col(static_cast<Eigen::Index>(k)).data() + xs.rows());
            const nn::Vector out = model(xs.col(static_cast<Eigen::Index>(k))).col(0);
            const auto predicted = nn::argmax(std::span<const double>(out.data(), static_cast<std::size_t>(out.size())));
            explain::Attribution a;
            if (e.method.kind == explain::Method::Kind::Exact) {
                a = explain::exact_shapley(model, x, background, predicted, names, e.method.exact);
            } else {
                a = explain::sampled_shapley(model, x, background, predicted, names, e.method.permutations,
                                             mix64(e.method.seed + 0x9e37 + k));
            }
            auto report = explain::local_report(a).to_json();
            report["row"] = rows[k];
            report["label"] = level_name(data.rows[rows[k]].label);
            report["predicted"] = level_name(static_cast<HospitalLevel>(predicted));
            locals.push_back(report);
        }
        write_json(std::string("local_") + v.suffix + ".json",
                   {{"config_hash", cfg_.hash_hex()}, {"variant", v.tag}, {"instances", locals}});

        out_ << "explain " << v.tag << ": top features";
        for (std::size_t k = 0; k < 3 && k < global.ranking.size(); ++k) out_ << ' ' << names[global.ranking[k]];
        out_ << '\n';
    }

    void compare() {
        const auto without = metrics::MetricReport::from_json(read_json("metrics_noae.json", "evaluate --no-ae"));
        const auto with = metrics::MetricReport::from_json(read_json("metrics_ae.json", "evaluate --ae"));
        std::ofstream f(cfg_.out_dir / "table4_report.csv");
        metrics::write_comparison_table(f, without, with, hash_comment());
        if (!f) throw Error("failed writing comparison table");
        metrics::write_comparison_table(out_, without, with);
    }

    bool has(const std::string& name) const { return fs::exists(cfg_.out_dir / name); }

private:
    struct FeatureData {
        std::vector<features::VisitFeatureVector> rows;
        features::ScalerParams scaler;
        std::vector<std::size_t> test;
        std::vector<std::size_t> balanced;
        std::vector<pipeline::Fold> folds;

        nn::Matrix scaled(const std::vector<std::size_t>& idx) const {
            nn::Matrix x(static_cast<Eigen::Index>(features::kFeatureCount), static_cast<Eigen::Index>(idx.size()));
            for (std::size_t j = 0; j < idx.size(); ++j) {
                const auto v = features::scale_vector(rows.at(idx[j]), scaler);
                for (std::size_t i = 0; i < v.size(); ++i) {
                    x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[i];
                }
            }
            return x;
        }
        std::vector<int> labels(const std::vector<std::size_t>& idx) const {
            std::vector<int> y;
            y.reserve(idx.size());
            for (auto i : idx) y.push_back(level_code(rows.at(i).label));
            return y;
        }
        Eigen::Index pool_position(std::size_t row) const {
            const auto it = std::lower_bound(balanced.begin(), balanced.end(), row);
            if (it == balanced.end() || *it != row) throw DataError("fold row outside the balanced pool");
            return static_cast<Eigen::Index>(it - balanced.begin());
        }
    };

    struct Models {
        nn::TrainedModel classifier;
        std::optional<nn::TrainedModel> ae;
    };

    std::string hash_comment() const { return "config_hash=" + cfg_.hash_hex(); }

    void require(const std::string& name, const std::string& stage) const {
        if (!has(name)) {
            throw MissingInputError("missing artifact " + (cfg_.out_dir / name).string() + "; run `" + stage +
                                    "` first");
        }
    }

    json read_json(const std::string& name, const std::string& stage) const {
        require(name, stage);
        std::ifstream in(cfg_.out_dir / name);
        try {
            return json::parse(in);
        } catch (const json::exception& ex) {
            throw ParseError((cfg_.out_dir / name).string(), 0, "", ex.what());
        }
    }

    void write_json(const std::string& name, const json& j) const {
        std::ofstream f(cfg_.out_dir / name);
        f << j.dump(1) << '\n';
        if (!f) throw Error("failed writing " + (cfg_.out_dir / name).string());
    }

    void write_model(const std::string& name, const nn::TrainedModel& m) const {
        json j = nn::to_json(m);
        j["config_hash"] = cfg_.hash_hex();
        write_json(name, j);
    }

    FeatureData load_features() const {
        require("features.csv", "features");
        FeatureData d;
        d.rows = features::read_feature_csv(cfg_.out_dir / "features.csv");
        d.scaler = features::ScalerParams::from_json(read_json("scaler.json", "features"));
        const auto m = read_json("split_manifest.json", "features");
        d.test = m.at("test").get<std::vector<std::size_t>>();
        d.balanced = m.at("balanced_train").get<std::vector<std::size_t>>();
        for (const auto& f : m.at("folds")) {
            d.folds.push_back({f.at("fit").get<std::vector<std::size_t>>(),
                               f.at("validation").get<std::vector<std::size_t>>()});
        }
        return d;
    }

    Models load_models(const Variant& v) const {
        const std::string train_cmd = std::string("train ") + (v.ae ? "--ae" : "--no-ae");
        Models m;
        m.classifier = nn::model_from_json(read_json(std::string("model_") + v.suffix + ".json", train_cmd));
        if (v.ae) m.ae = nn::model_from_json(read_json("ae.json", train_cmd));
        return m;
    }

    RunConfig cfg_;
    std::ostream& out_;
};

int exit_code_for(const std::exception& ex) {
    if (dynamic_cast<const ConfigError*>(&ex)) return kBadConfig;
    if (dynamic_cast<const MissingInputError*>(&ex)) return kMissingArtifact;
    if (dynamic_cast<const ParseError*>(&ex)) return kParseFailure;
    if (dynamic_cast<const DivergenceError*>(&ex)) return kDivergence;
    if (dynamic_cast<const DataError*>(&ex)) return kEmptyData;
    return kFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Hospital-level choice prediction pipeline"};
    app.require_subcommand(1);
    std::string config_path;
    std::string out_dir;
    std::vector<std::string> overrides;
    bool with_ae = false;
    bool without_ae = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config_path, "key=value configuration file");
        sub->add_option("-o,--out", out_dir, "run directory (overrides out_dir)");
        sub->add_option("-s,--set", overrides, "key=value override, repeatable");
    };
    auto add_variant = [&](CLI::App* sub) {
        auto* a = sub->add_flag("--ae", with_ae, "use autoencoder preprocessing");
        auto* b = sub->add_flag("--no-ae", without_ae, "classifier on raw features");
        a->excludes(b);
    };
    std::vector<CLI::App*> subs;
    subs.push_back(app.add_subcommand("synth", "generate a synthetic cohort"));
    subs.push_back(app.add_subcommand("ingest", "load inputs and report the exclusion audit"));
    subs.push_back(app.add_subcommand("features", "export the feature matrix, split and scaler"));
    subs.push_back(app.add_subcommand("train", "cross-validate and fit a classifier"));
    subs.push_back(app.add_subcommand("evaluate", "test-set metrics"));
    subs.push_back(app.add_subcommand("explain", "Shapley attributions"));
    subs.push_back(app.add_subcommand("compare", "withoutAE / withAE comparison table"));
    for (auto* s : subs) add_common(s);
    for (auto* s : {subs[3], subs[4], subs[5]}) add_variant(s);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& ex) {
        err << "error: " << ex.what() << '\n';
        return kUsage;
    }

    try {
        KeyValueConfig cfg = config_path.empty() ? KeyValueConfig{} : KeyValueConfig::load(config_path);
        for (const auto& o : overrides) cfg.apply_override(o);
        if (!out_dir.empty()) cfg.set("out_dir", out_dir);
        Run run(RunConfig::from_config(cfg), out);

        const std::string cmd = app.get_subcommands().front()->get_name();
        if (cmd == "synth") {
            run.synth();
        } else if (cmd == "ingest") {
            run.ingest();
        } else if (cmd == "features") {
            run.features();
        } else if (cmd == "train") {
            run.train(with_ae ? kWithAe : kNoAe);
        } else if (cmd == "evaluate" || cmd == "explain") {
            std::vector<Variant> variants;
            if (with_ae) {
                variants = {kWithAe};
            } else if (without_ae) {
                variants = {kNoAe};
            } else {
                if (run.has("model_noae.json")) variants.push_back(kNoAe);
                if (run.has("model_ae.json")) variants.push_back(kWithAe);
                if (variants.empty()) throw MissingInputError("no trained model found; run `train` first");
            }
            for (const auto& v : variants) cmd == "evaluate" ? run.evaluate(v) : run.explain(v);
        } else if (cmd == "compare") {
            run.compare();
        }
        return kOk;
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << '\n';
        return exit_code_for(ex);
    }
}

}  // namespace hlchoice::cli
