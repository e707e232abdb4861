#include "hlchoice/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "hlchoice/csv.hpp"
#include "hlchoice/error.hpp"
#include "hlchoice/features.hpp"
#include "hlchoice/ingest.hpp"
#include "hlchoice/rng.hpp"

namespace hlchoice::synth {

namespace {

const Date kCalendarStart{2008, 1, 1};
const Date kCalendarEnd{2011, 12, 31};
const Date kAgeReference{2010, 1, 1};
constexpr double kDaysPerYear = 365.2425;

std::string numbered(const char* prefix, std::size_t i, int width) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, i);
    return buf;
}

/// Largest-remainder apportionment of `total` items by `weights`.
std::vector<std::size_t> apportion(std::size_t total, std::span<const double> weights) {
    const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<std::size_t> out(weights.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double exact = static_cast<double>(total) * weights[i] / sum;
        out[i] = static_cast<std::size_t>(std::floor(exact));
        assigned += out[i];
        remainders.emplace_back(exact - std::floor(exact), i);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++out[remainders[k % remainders.size()].second];
    return out;
}

/// Stratified uniforms: one draw in each of n equal strata, in random order.
std::vector<double> stratified_uniforms(std::size_t n, Rng& rng) {
    const auto perm = rng.permutation(n);
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) {
        u[i] = std::clamp((static_cast<double>(perm[i]) + rng.uniform()) / static_cast<double>(n), 1e-12,
                          1.0 - 1e-12);
    }
    return u;
}

/// Exactly round(rate * n) of n positions set, chosen at random.
std::vector<bool> exact_flags(std::size_t n, double rate, Rng& rng) {
    const auto k = static_cast<std::size_t>(std::llround(rate * static_cast<double>(n)));
    const auto perm = rng.permutation(n);
    std::vector<bool> out(n, false);
    for (std::size_t i = 0; i < k && i < n; ++i) out[perm[i]] = true;
    return out;
}

class Zipf {
public:
    Zipf(std::size_t n, double exponent) : cdf_(n) {
        double acc = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            acc += 1.0 / std::pow(static_cast<double>(k + 1), exponent);
            cdf_[k] = acc;
        }
        for (auto& c : cdf_) c /= acc;
    }
    std::size_t draw(Rng& rng) const {
        const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), rng.uniform());
        return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
    }

private:
    std::vector<double> cdf_;
};

std::string dx_token(std::size_t k) { return numbered("DX", k + 1, 3); }

bool is_holiday(const Date& d) {
    const auto ymd = d.ymd();
    const unsigned m = static_cast<unsigned>(ymd.month());
    const unsigned day = static_cast<unsigned>(ymd.day());
    return (m == 1 && day == 1) || (m == 10 && day == 10);
}

struct Slot {
    std::size_t patient = 0;
    bool usual = false;
};

}  // namespace

void CohortSpec::validate() const {
    auto check = [](bool ok, const std::string& what) {
        if (!ok) throw ConfigError("cohort spec: " + what);
    };
    check(n_patients >= 1, "n_patients must be at least 1");
    const double sum = std::accumulate(priors.begin(), priors.end(), 0.0);
    check(std::abs(sum - 1.0) <= 1e-3, "class priors must sum to 1");
    for (double p : priors) check(p > 0.0 && p < 1.0, "class priors must lie in (0, 1)");
    for (double r : {male_rate, low_income_rate, surgery_rate, er_rate, severe_rate, workday_rate, loyalty}) {
        check(r >= 0.0 && r <= 1.0, "rates must lie in [0, 1]");
    }
    check(signal_strength >= 0.0 && signal_strength <= 1.0, "signal_strength must lie in [0, 1]");
    check(age_sd > 0.0 && visits_mean >= 1.0 && visits_sd > 0.0, "age and visit moments must be positive");
    check(patients_per_provider > 0.0, "patients_per_provider must be positive");
    check(n_regions >= 1, "n_regions must be at least 1");
    check(density_max >= density_min && density_min >= 0.0, "density range is invalid");
    check(dx_vocabulary >= 2 && chronic_stride >= 1, "diagnosis vocabulary is invalid");
}

CohortSpec CohortSpec::from_config(const KeyValueConfig& cfg) {
    CohortSpec s;
    s.n_patients = static_cast<std::size_t>(cfg.get_int("n_patients", static_cast<long long>(s.n_patients)));
    s.seed = cfg.get_u64("seed", s.seed);
    for (auto level : kAllLevels) {
        const auto i = static_cast<std::size_t>(level_code(level));
        const std::string name(level_name(level));
        s.priors[i] = cfg.get_double("prior." + name, s.priors[i]);
        s.mfpc_coef[i] = cfg.get_double("mfpc_coef." + name, s.mfpc_coef[i]);
        s.density_coef[i] = cfg.get_double("density_coef." + name, s.density_coef[i]);
    }
    s.age_mean = cfg.get_double("age_mean", s.age_mean);
    s.age_sd = cfg.get_double("age_sd", s.age_sd);
    s.male_rate = cfg.get_double("male_rate", s.male_rate);
    s.low_income_rate = cfg.get_double("low_income_rate", s.low_income_rate);
    s.visits_mean = cfg.get_double("visits_mean", s.visits_mean);
    s.visits_sd = cfg.get_double("visits_sd", s.visits_sd);
    s.surgery_rate = cfg.get_double("surgery_rate", s.surgery_rate);
    s.er_rate = cfg.get_double("er_rate", s.er_rate);
    s.severe_rate = cfg.get_double("severe_rate", s.severe_rate);
    s.workday_rate = cfg.get_double("workday_rate", s.workday_rate);
    s.signal_strength = cfg.get_double("signal_strength", s.signal_strength);
    s.loyalty = cfg.get_double("loyalty", s.loyalty);
    s.patients_per_provider = cfg.get_double("patients_per_provider", s.patients_per_provider);
    s.n_regions = static_cast<std::size_t>(cfg.get_int("n_regions", static_cast<long long>(s.n_regions)));
    s.density_min = cfg.get_double("density_min", s.density_min);
    s.density_max = cfg.get_double("density_max", s.density_max);
    s.dx_vocabulary = static_cast<std::size_t>(cfg.get_int("dx_vocabulary", static_cast<long long>(s.dx_vocabulary)));
    s.dx_zipf_exponent = cfg.get_double("dx_zipf_exponent", s.dx_zipf_exponent);
    s.chronic_stride = static_cast<std::size_t>(cfg.get_int("chronic_stride", static_cast<long long>(s.chronic_stride)));
    s.dirty = cfg.get_bool("dirty", s.dirty);
    s.dirty_base = static_cast<std::size_t>(cfg.get_int("dirty_base", static_cast<long long>(s.dirty_base)));
    s.validate();
    return s;
}

KeyValueConfig CohortSpec::to_config() const {
    KeyValueConfig cfg;
    auto num = [](double v) { return csv::format_double(v); };
    cfg.set("n_patients", std::to_string(n_patients));
    cfg.set("seed", std::to_string(seed));
    for (auto level : kAllLevels) {
        const auto i = static_cast<std::size_t>(level_code(level));
        const std::string name(level_name(level));
        cfg.set("prior." + name, num(priors[i]));
        cfg.set("mfpc_coef." + name, num(mfpc_coef[i]));
        cfg.set("density_coef." + name, num(density_coef[i]));
    }
    cfg.set("age_mean", num(age_mean));
    cfg.set("age_sd", num(age_sd));
    cfg.set("male_rate", num(male_rate));
    cfg.set("low_income_rate", num(low_income_rate));
    cfg.set("visits_mean", num(visits_mean));
    cfg.set("visits_sd", num(visits_sd));
    cfg.set("surgery_rate", num(surgery_rate));
    cfg.set("er_rate", num(er_rate));
    cfg.set("severe_rate", num(severe_rate));
    cfg.set("workday_rate", num(workday_rate));
    cfg.set("signal_strength", num(signal_strength));
    cfg.set("loyalty", num(loyalty));
    cfg.set("patients_per_provider", num(patients_per_provider));
    cfg.set("n_regions", std::to_string(n_regions));
    cfg.set("density_min", num(density_min));
    cfg.set("density_max", num(density_max));
    cfg.set("dx_vocabulary", std::to_string(dx_vocabulary));
    cfg.set("dx_zipf_exponent", num(dx_zipf_exponent));
    cfg.set("chronic_stride", std::to_string(chronic_stride));
    cfg.set("dirty", dirty ? "true" : "false");
    cfg.set("dirty_base", std::to_string(dirty_base));
    return cfg;
}

namespace {

void inject_violations(const CohortSpec& spec, Cohort& cohort, Rng& rng) {
    Dataset& d = cohort.dataset;
    auto count = [&](ExclusionReason r) { return spec.dirty_base + static_cast<std::size_t>(r); };
    const std::size_t n_clean_patients = d.patients.size();
    std::vector<std::size_t> complete_providers(d.providers.size());
    std::iota(complete_providers.begin(), complete_providers.end(), std::size_t{0});

    auto valid_visit = [&](const PatientProfile& p) {
        VisitRecord v;
        v.patient_id = p.patient_id;
        v.provider_id = d.providers[complete_providers[rng.index(complete_providers.size())]].provider_id;
        const Date lo = std::max(kCalendarStart, p.birth_date->plus_days(1));
        v.visit_date = lo.plus_days(static_cast<long>(rng.index(static_cast<std::uint64_t>(kCalendarEnd.serial() - lo.serial() + 1))));
        v.primary_dx = dx_token(0);
        v.dx_codes = {v.primary_dx};
        v.treatment_codes = {"TX001"};
        return v;
    };
    auto existing_patient = [&]() -> const PatientProfile& {
        return d.patients[rng.index(n_clean_patients)];
    };

    std::size_t extra_id = 0;
    auto extra_patient = [&](Gender g) {
        PatientProfile p;
        p.patient_id = numbered("X", ++extra_id, 6);
        p.birth_date = Date{1970, 6, 15};
        p.gender = g;
        return p;
    };

    std::vector<PatientProfile> new_patients;
    std::vector<VisitRecord> new_visits;
    for (std::size_t i = 0; i < count(ExclusionReason::MissingBirthOrGender); ++i) {
        auto p = extra_patient(Gender::Unknown);
        if (i % 2 == 1) {
            p.gender = Gender::Female;
            p.birth_date.reset();
        }
        auto v = valid_visit(extra_patient(Gender::Male));
        v.patient_id = p.patient_id;
        if (!p.birth_date) v.visit_date = Date{2009, 3, 2};
        new_visits.push_back(v);
        new_patients.push_back(p);
    }
    for (std::size_t i = 0; i < count(ExclusionReason::ConflictingGender); ++i) {
        auto p = extra_patient(Gender::Conflicting);
        new_visits.push_back(valid_visit(p));
        new_patients.push_back(p);
    }
    for (std::size_t i = 0; i < count(ExclusionReason::NoVisits); ++i) {
        new_patients.push_back(extra_patient(i % 2 == 0 ? Gender::Male : Gender::Female));
    }
    for (std::size_t i = 0; i < count(ExclusionReason::MissingVisitDate); ++i) {
        auto v = valid_visit(existing_patient());
        v.visit_date.reset();
        new_visits.push_back(v);
    }
    for (std::size_t i = 0; i < count(ExclusionReason::BirthAfterVisit); ++i) {
        const auto& p = existing_patient();
        auto v = valid_visit(p);
        v.visit_date = p.birth_date->plus_days(-1 - static_cast<long>(rng.index(365)));
        new_visits.push_back(v);
    }
    for (std::size_t i = 0; i < count(ExclusionReason::NoPrimaryDiagnosis); ++i) {
        auto v = valid_visit(existing_patient());
        v.primary_dx.clear();
        v.dx_codes = {dx_token(1)};
        new_visits.push_back(v);
    }
    for (std::size_t i = 0; i < count(ExclusionReason::IncompleteHospitalInfo); ++i) {
        auto v = valid_visit(existing_patient());
        ProviderProfile broken;
        broken.provider_id = numbered("HX", i + 1, 4);
        switch (i % 3) {
            case 0:
                broken.region_code = d.region_stats.front().region_code;
                d.providers.push_back(broken);
                break;
            case 1:
                broken.level = HospitalLevel::Clinic;
                d.providers.push_back(broken);
                break;
            default:
                break;  // provider absent from the registry
        }
        v.provider_id = broken.provider_id;
        new_visits.push_back(v);
    }

    for (auto r : kAllReasons) cohort.expected_audit[r] = count(r);
    cohort.expected_audit[ExclusionReason::NoVisits] += count(ExclusionReason::MissingBirthOrGender) +
                                                         count(ExclusionReason::ConflictingGender);
    d.patients.insert(d.patients.end(), new_patients.begin(), new_patients.end());
    d.visits.insert(d.visits.end(), new_visits.begin(), new_visits.end());
    d.canonicalize();
}

}  // namespace

Cohort generate_cohort(const CohortSpec& spec) {
    spec.validate();
    const std::size_t n = spec.n_patients;
    const double s = spec.signal_strength;
    std::array<double, kLevelCount> priors = spec.priors;
    const double prior_sum = std::accumulate(priors.begin(), priors.end(), 0.0);
    for (auto& p : priors) p /= prior_sum;
    Cohort cohort;
    Dataset& d = cohort.dataset;

    // Calendar and code lists.
    std::vector<Date> workdays;
    std::vector<Date> restdays;
    for (Date day = kCalendarStart; day <= kCalendarEnd; day = day.plus_days(1)) {
        const bool work = day.iso_weekday_index() < 5 && !is_holiday(day);
        d.calendar.set(day, work);
        (work ? workdays : restdays).push_back(day);
    }
    for (std::size_t i = 1; i <= 10; ++i) d.code_sets.surgery_codes.insert(numbered("SRG", i, 2));
    for (std::size_t i = 1; i <= 5; ++i) d.code_sets.er_codes.insert(numbered("ER", i, 2));
    for (std::size_t i = 1; i <= 5; ++i) d.code_sets.catastrophic_dx_codes.insert(numbered("CAT", i, 2));
    for (std::size_t k = 0; k < spec.dx_vocabulary; ++k) {
        if ((k + 1) % spec.chronic_stride == 0) d.code_sets.chronic_dx_codes.insert(dx_token(k));
    }

    // Regions.
    std::vector<double> z(spec.n_regions, 0.0);
    for (std::size_t r = 0; r < spec.n_regions; ++r) {
        const double t = spec.n_regions == 1 ? 0.0 : static_cast<double>(r) / static_cast<double>(spec.n_regions - 1);
        d.region_stats.push_back({numbered("R", r + 1, 2), spec.density_min + t * (spec.density_max - spec.density_min)});
        z[r] = 2.0 * t - 1.0;
    }

    // Providers.
    Rng provider_rng(derive_seed(spec.seed, "synth.providers"));
    const auto n_providers = std::max<std::size_t>(
        kLevelCount, static_cast<std::size_t>(std::llround(static_cast<double>(n) / spec.patients_per_provider)));
    std::array<double, kLevelCount> scarcity{};
    for (std::size_t l = 0; l < kLevelCount; ++l) scarcity[l] = priors[l] * std::exp(-s * spec.mfpc_coef[l]);
    auto per_level = apportion(n_providers - kLevelCount, scarcity);
    std::vector<HospitalLevel> provider_levels;
    for (std::size_t l = 0; l < kLevelCount; ++l) {
        provider_levels.insert(provider_levels.end(), per_level[l] + 1, static_cast<HospitalLevel>(l));
    }
    provider_rng.shuffle(provider_levels);
    std::array<std::vector<std::size_t>, kLevelCount> by_level;
    for (std::size_t i = 0; i < provider_levels.size(); ++i) {
        const auto l = static_cast<std::size_t>(level_code(provider_levels[i]));
        std::vector<double> w(spec.n_regions);
        for (std::size_t r = 0; r < spec.n_regions; ++r) w[r] = std::exp(s * spec.density_coef[l] * z[r]);
        ProviderProfile p;
        p.provider_id = numbered("H", i + 1, 5);
        p.level = provider_levels[i];
        p.region_code = d.region_stats[provider_rng.categorical(w)].region_code;
        d.providers.push_back(p);
        by_level[l].push_back(i);
    }

    // Patients.
    Rng patient_rng(derive_seed(spec.seed, "synth.patients"));
    const boost::math::normal_distribution<double> std_normal(0.0, 1.0);
    const auto age_u = stratified_uniforms(n, patient_rng);
    const auto male = exact_flags(n, spec.male_rate, patient_rng);
    const auto low_income = exact_flags(n, spec.low_income_rate, patient_rng);
    const double sigma2 = std::log(1.0 + (spec.visits_sd / spec.visits_mean) * (spec.visits_sd / spec.visits_mean));
    const double mu = std::log(spec.visits_mean) - sigma2 / 2.0;
    const auto visit_u = stratified_uniforms(n, patient_rng);
    std::vector<std::size_t> visit_counts(n);
    std::vector<std::size_t> usual_counts(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double age =
            std::clamp(spec.age_mean + spec.age_sd * boost::math::quantile(std_normal, age_u[i]), 0.0, 110.0);
        PatientProfile p;
        p.patient_id = numbered("C", i + 1, 6);
        p.birth_date = kAgeReference.plus_days(-static_cast<long>(std::llround(age * kDaysPerYear)));
        p.gender = male[i] ? Gender::Male : Gender::Female;
        p.low_income = low_income[i];
        d.patients.push_back(p);

        const double v = std::exp(mu + std::sqrt(sigma2) * boost::math::quantile(std_normal, visit_u[i]));
        visit_counts[i] = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(v)));
        const double usual = spec.loyalty * static_cast<double>(visit_counts[i]);
        usual_counts[i] = std::clamp<std::size_t>(
            static_cast<std::size_t>(std::floor(usual + patient_rng.uniform())), 1, visit_counts[i]);
    }

    // Usual providers: levels assigned systematically in proportion to usual-visit volume.
    Rng choice_rng(derive_seed(spec.seed, "synth.choices"));
    std::vector<std::size_t> usual_provider(n);
    {
        const auto order = choice_rng.permutation(n);
        const double total = static_cast<double>(std::accumulate(usual_counts.begin(), usual_counts.end(), std::size_t{0}));
        std::array<double, kLevelCount> bounds{};
        double acc = 0.0;
        for (std::size_t l = 0; l < kLevelCount; ++l) bounds[l] = (acc += priors[l]);
        double cum = 0.0;
        for (std::size_t i : order) {
            const double mid = (cum + static_cast<double>(usual_counts[i]) / 2.0) / total;
            cum += static_cast<double>(usual_counts[i]);
            std::size_t l = 0;
            while (l + 1 < kLevelCount && mid > bounds[l]) ++l;
            usual_provider[i] = by_level[l][choice_rng.index(by_level[l].size())];
        }
    }

    // Every visit slot; non-usual slots get levels in exact prior proportions.
    std::vector<Slot> slots;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < visit_counts[i]; ++k) slots.push_back({i, k < usual_counts[i]});
    }
    const std::size_t n_visits = slots.size();
    std::vector<std::size_t> slot_provider(n_visits);
    {
        std::vector<std::size_t> other;
        for (std::size_t j = 0; j < n_visits; ++j) {
            if (slots[j].usual) {
                slot_provider[j] = usual_provider[slots[j].patient];
            } else {
                other.push_back(j);
            }
        }
        const auto counts = apportion(other.size(), priors);
        std::vector<std::size_t> levels;
        for (std::size_t l = 0; l < kLevelCount; ++l) levels.insert(levels.end(), counts[l], l);
        choice_rng.shuffle(levels);
        for (std::size_t k = 0; k < other.size(); ++k) {
            const auto& pool = by_level[levels[k]];
            slot_provider[other[k]] = pool[choice_rng.index(pool.size())];
        }
    }

    // Incident attributes.
    Rng visit_rng(derive_seed(spec.seed, "synth.visits"));
    const auto workday = exact_flags(n_visits, spec.workday_rate, visit_rng);
    const auto surgery = exact_flags(n_visits, spec.surgery_rate, visit_rng);
    const auto er = exact_flags(n_visits, spec.er_rate, visit_rng);
    const auto severe = exact_flags(n_visits, spec.severe_rate, visit_rng);
    const Zipf zipf(spec.dx_vocabulary, spec.dx_zipf_exponent);
    const std::vector<std::string> surgery_codes(d.code_sets.surgery_codes.begin(), d.code_sets.surgery_codes.end());
    const std::vector<std::string> er_codes(d.code_sets.er_codes.begin(), d.code_sets.er_codes.end());
    const std::vector<std::string> cat_codes(d.code_sets.catastrophic_dx_codes.begin(),
                                             d.code_sets.catastrophic_dx_codes.end());

    std::size_t j = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const PatientProfile& p = d.patients[i];
        std::vector<std::size_t> conditions(1 + visit_rng.index(4));
        for (auto& c : conditions) c = zipf.draw(visit_rng);

        const std::size_t first = j;
        const std::size_t count = visit_counts[i];
        std::vector<std::size_t> providers(slot_provider.begin() + static_cast<long>(first),
                                           slot_provider.begin() + static_cast<long>(first + count));
        visit_rng.shuffle(providers);
        std::vector<VisitRecord> visits;
        for (std::size_t k = 0; k < count; ++k, ++j) {
            VisitRecord v;
            v.patient_id = p.patient_id;
            v.provider_id = d.providers[providers[k]].provider_id;
            const auto& pool = workday[j] ? workdays : restdays;
            const Date lo = std::max(kCalendarStart, p.birth_date->plus_days(1));
            const auto from = static_cast<std::size_t>(std::lower_bound(pool.begin(), pool.end(), lo) - pool.begin());
            v.visit_date = pool[from + visit_rng.index(pool.size() - from)];

            v.primary_dx = dx_token(visit_rng.bernoulli(0.7) ? conditions[visit_rng.index(conditions.size())]
                                                             : zipf.draw(visit_rng));
            v.dx_codes.insert(v.primary_dx);
            for (std::size_t e = visit_rng.index(3); e > 0; --e) v.dx_codes.insert(dx_token(zipf.draw(visit_rng)));
            v.treatment_codes.insert(numbered("TX", 1 + visit_rng.index(50), 3));
            if (surgery[j]) v.treatment_codes.insert(surgery_codes[visit_rng.index(surgery_codes.size())]);
            if (er[j]) {
                if (visit_rng.bernoulli(0.8)) {
                    v.setting = Setting::Emergency;
                } else {
                    v.treatment_codes.insert(er_codes[visit_rng.index(er_codes.size())]);
                }
            }
            if (severe[j]) {
                if (v.setting == Setting::Emergency) {
                    v.triage_level = 1 + static_cast<int>(visit_rng.index(3));
                } else if (visit_rng.bernoulli(0.5)) {
                    v.catastrophic_illness = true;
                } else {
                    v.primary_dx = cat_codes[visit_rng.index(cat_codes.size())];
                    v.dx_codes.insert(v.primary_dx);
                }
            } else if (v.setting == Setting::Emergency) {
                v.triage_level = 4 + static_cast<int>(visit_rng.index(2));
            }
            visits.push_back(std::move(v));
        }
        std::stable_sort(visits.begin(), visits.end(),
                         [](const VisitRecord& a, const VisitRecord& b) { return a.visit_date < b.visit_date; });
        for (auto& v : visits) d.visits.push_back(std::move(v));
    }
    d.canonicalize();

    if (spec.dirty) {
        Rng dirty_rng(derive_seed(spec.seed, "synth.dirty"));
        inject_violations(spec, cohort, dirty_rng);
    }
    return cohort;
}

void write_cohort(const Cohort& cohort, const CohortSpec& spec, const std::filesystem::path& dir) {
    ingest::write_dataset(cohort.dataset, dir);
    std::ofstream audit(dir / "expected_audit.json");
    audit << ingest::audit_to_json(cohort.expected_audit).dump(2) << '\n';
    std::ofstream snapshot(dir / "cohort_spec.txt");
    snapshot << spec.to_config().to_text();
    if (!audit || !snapshot) throw Error("failed writing cohort metadata under " + dir.string());
}

nlohmann::json CohortSummary::to_json() const {
    nlohmann::json shares = nlohmann::json::object();
    for (auto level : kAllLevels) {
        shares[std::string(level_name(level))] = level_share[static_cast<std::size_t>(level_code(level))];
    }
    return {{"level_share", shares},       {"age_mean", age_mean},         {"male_rate", male_rate},
            {"low_income_rate", low_income_rate}, {"visits_mean", visits_mean}, {"surgery_rate", surgery_rate},
            {"er_rate", er_rate},          {"severe_rate", severe_rate},   {"workday_rate", workday_rate},
            {"upc_mean", upc_mean}};
}

CohortSummary summarize_cohort(const Dataset& d) {
    CohortSummary s;
    if (d.patients.empty() || d.visits.empty()) throw DataError("cannot summarize an empty cohort");
    const double np = static_cast<double>(d.patients.size());
    const double nv = static_cast<double>(d.visits.size());
    for (const auto& p : d.patients) {
        if (p.birth_date) s.age_mean += static_cast<double>(kAgeReference.serial() - p.birth_date->serial()) / kDaysPerYear;
        if (p.gender == Gender::Male) s.male_rate += 1.0;
        if (p.low_income) s.low_income_rate += 1.0;
    }
    s.age_mean /= np;
    s.male_rate /= np;
    s.low_income_rate /= np;
    s.visits_mean = nv / np;

    std::size_t b = 0;
    std::size_t patients_seen = 0;
    for (std::size_t i = 0; i < d.visits.size(); ++i) {
        const auto& v = d.visits[i];
        if (const auto* prov = d.find_provider(v.provider_id); prov && prov->level) {
            s.level_share[static_cast<std::size_t>(level_code(*prov->level))] += 1.0;
        }
        const auto f = features::incident_flags(v, d.code_sets, d.calendar);
        s.surgery_rate += f.is_surgery;
        s.er_rate += f.is_er;
        s.severe_rate += f.is_severe;
        s.workday_rate += f.is_workday;
        if (i + 1 == d.visits.size() || d.visits[i + 1].patient_id != v.patient_id) {
            std::vector<std::string> providers;
            for (std::size_t k = b; k <= i; ++k) providers.push_back(d.visits[k].provider_id);
            s.upc_mean += features::continuity_indices(features::VisitSequence(v.patient_id, providers)).upc;
            ++patients_seen;
            b = i + 1;
        }
    }
    for (auto& x : s.level_share) x /= nv;
    s.surgery_rate /= nv;
    s.er_rate /= nv;
    s.severe_rate /= nv;
    s.workday_rate /= nv;
    s.upc_mean /= static_cast<double>(patients_seen);
    return s;
}

}  // namespace hlchoice::synth
