#pragma once

#include <array>
#include <cstdint>
#include <filesystem>

#include <json.hpp>

#include "hlchoice/config.hpp"
#include "hlchoice/domain.hpp"

namespace hlchoice::synth {

/// Generator parameters. Per-level arrays are indexed by HospitalLevel code.
struct CohortSpec {
    std::size_t n_patients = 5000;
    std::uint64_t seed = 1;
    std::array<double, kLevelCount> priors{0.0851, 0.1073, 0.0835, 0.7242};
    double age_mean = 45.80;
    double age_sd = 16.33;
    double male_rate = 0.4791;
    double low_income_rate = 0.0228;
    double visits_mean = 16.70;
    double visits_sd = 15.39;
    double surgery_rate = 0.0279;
    double er_rate = 0.0181;
    double severe_rate = 0.0349;
    double workday_rate = 0.8373;
    double signal_strength = 0.0;

    /// Share of a patient's visits that go to their usual provider.
    double loyalty = 0.52;
    /// Average usual-provider patients per provider when signal_strength = 0.
    double patients_per_provider = 1.0;
    std::size_t n_regions = 8;
    double density_min = 10.0;
    double density_max = 40.0;
    /// Log provider-scarcity per level: provider counts scale with exp(-s * a_L).
    std::array<double, kLevelCount> mfpc_coef{4.0, 3.0, 1.5, 0.0};
    /// Region placement: P(region | L) proportional to exp(s * b_L * z_region).
    std::array<double, kLevelCount> density_coef{2.0, 1.0, -1.0, -0.5};

    std::size_t dx_vocabulary = 200;
    double dx_zipf_exponent = 1.1;
    /// Every `chronic_stride`-th diagnosis token is chronic.
    std::size_t chronic_stride = 5;

    /// Dirty mode injects `dirty_base + i` violations of the i-th exclusion reason.
    bool dirty = false;
    std::size_t dirty_base = 3;

    /// Throws ConfigError on invalid values. Priors may miss 1 by rounding (1e-3); they are normalized.
    void validate() const;

    static CohortSpec from_config(const KeyValueConfig& cfg);
    KeyValueConfig to_config() const;
};

struct Cohort {
    Dataset dataset;
    /// Audit that ingest must report; all zero unless dirty.
    ExclusionAudit expected_audit;
};

Cohort generate_cohort(const CohortSpec& spec);

/// Writes the ingest file set plus expected_audit.json and cohort_spec.txt.
void write_cohort(const Cohort& cohort, const CohortSpec& spec, const std::filesystem::path& dir);

/// Empirical marginals of a clean dataset, in CohortSpec units.
struct CohortSummary {
    std::array<double, kLevelCount> level_share{};
    double age_mean = 0.0;
    double male_rate = 0.0;
    double low_income_rate = 0.0;
    double visits_mean = 0.0;
    double surgery_rate = 0.0;
    double er_rate = 0.0;
    double severe_rate = 0.0;
    double workday_rate = 0.0;
    double upc_mean = 0.0;

    nlohmann::json to_json() const;
};

CohortSummary summarize_cohort(const Dataset& dataset);

}  // namespace hlchoice::synth
