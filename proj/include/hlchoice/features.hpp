#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hlchoice/domain.hpp"

namespace hlchoice::features {

inline constexpr std::size_t kFeatureCount = 18;

/// Model inputs in declaration order. This order is the column order of every
/// feature matrix and the tie-break order of importance rankings.
enum class Feature : std::uint8_t {
    Age,
    Male,
    LowIncome,
    TotalVisits,
    TotalDiseases,
    TotalChronicDiseases,
    Upc,
    Lupc,
    Secoc,
    Coci,
    PhysicianDensity,
    Mfpc,
    Lfpc,
    IsSurgery,
    IsEr,
    IsSevere,
    IsWorkday,
    Dir,
};

inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames{
    "age",        "male",        "low_income", "total_visits",      "total_diseases", "total_chronic_diseases",
    "upc",        "lupc",        "secoc",      "coci",              "physician_density", "mfpc",
    "lfpc",       "is_surgery",  "is_er",      "is_severe",         "is_workday",     "dir"};

/// How a column is brought into [0, 1] before training.
enum class FeatureKind : std::uint8_t { MinMaxScaled, Ratio, Binary };

FeatureKind feature_kind(Feature f);
inline FeatureKind feature_kind(std::size_t i) { return feature_kind(static_cast<Feature>(i)); }

using FeatureArray = std::array<double, kFeatureCount>;

/// A patient's providers in chronological visit order.
class VisitSequence {
public:
    VisitSequence() = default;
    VisitSequence(std::string patient_id, std::vector<std::string> providers);

    const std::string& patient_id() const { return patient_id_; }
    const std::vector<std::string>& providers() const { return providers_; }
    /// N
    std::size_t total() const { return providers_.size(); }
    /// n_i per provider, keyed by provider id.
    const std::map<std::string, std::size_t>& counts() const { return counts_; }
    /// k
    std::size_t distinct() const { return counts_.size(); }

private:
    std::string patient_id_;
    std::vector<std::string> providers_;
    std::map<std::string, std::size_t> counts_;
};

struct ContinuityIndices {
    double upc = 0.0;
    double lupc = 0.0;
    double secoc = 0.0;
    double coci = 0.0;
};

/// UPC, LUPC, SECOC and COCI. With a single visit SECOC and COCI are 1.
/// Throws DataError on an empty sequence.
ContinuityIndices continuity_indices(const VisitSequence& seq);

struct ProviderVotes {
    std::string provider_id;
    std::size_t mfpc = 0;
    std::size_t lfpc = 0;
};

/// Vote tallies keyed by provider id. Providers nobody voted for are absent.
class VoteTable {
public:
    void add_mfpc(const std::string& provider);
    void add_lfpc(const std::string& provider);
    std::size_t mfpc(std::string_view provider) const;
    std::size_t lfpc(std::string_view provider) const;
    const std::map<std::string, ProviderVotes, std::less<>>& entries() const { return votes_; }

private:
    std::map<std::string, ProviderVotes, std::less<>> votes_;
};

/// Each patient votes once for its most visited provider (MFPC) and once for its
/// least visited provider (LFPC); ties go to the smallest provider id.
VoteTable provider_votes(std::span<const VisitSequence> sequences);

/// Share of `patient_visits` whose primary diagnosis equals the target's.
double disease_importance_rate(std::span<const VisitRecord> patient_visits, const VisitRecord& target);

struct IncidentFlags {
    bool is_surgery = false;
    bool is_er = false;
    bool is_severe = false;
    bool is_workday = false;

    friend bool operator==(const IncidentFlags&, const IncidentFlags&) = default;
};

/// Throws CoverageError when the visit date is outside the calendar.
IncidentFlags incident_flags(const VisitRecord& record, const CodeSets& codes, const WorkdayCalendar& calendar);

/// Per-patient quantities shared by all of that patient's visits.
struct PatientSummary {
    std::size_t total_visits = 0;
    std::size_t total_diseases = 0;
    std::size_t total_chronic_diseases = 0;
    ContinuityIndices indices;
};

PatientSummary summarize_patient(std::span<const VisitRecord> patient_visits, const CodeSets& codes);

struct VisitFeatureVector {
    double age = 0.0;
    bool male = false;
    bool low_income = false;
    double total_visits = 0.0;
    double total_diseases = 0.0;
    double total_chronic_diseases = 0.0;
    double upc = 0.0;
    double lupc = 0.0;
    double secoc = 0.0;
    double coci = 0.0;
    double physician_density = 0.0;
    double mfpc = 0.0;
    double lfpc = 0.0;
    bool is_surgery = false;
    bool is_er = false;
    bool is_severe = false;
    bool is_workday = false;
    double dir = 0.0;
    HospitalLevel label = HospitalLevel::Clinic;

    FeatureArray values() const;
    static VisitFeatureVector from_values(const FeatureArray& values, HospitalLevel label);

    friend bool operator==(const VisitFeatureVector&, const VisitFeatureVector&) = default;
};

/// Throws DataError naming the region when the provider's region has no density entry.
VisitFeatureVector assemble_visit_vector(const VisitRecord& record, const PatientProfile& patient,
                                         const ProviderProfile& provider, const PatientSummary& summary,
                                         const VoteTable& votes, std::span<const RegionStats> regions, double dir,
                                         const IncidentFlags& flags);

/// One row per visit of a clean dataset, in canonical visit order.
struct FeatureTable {
    std::vector<VisitFeatureVector> rows;
    std::vector<std::string> patient_ids;  // parallel to rows
};

/// Runs every feature computation over a clean (post-exclusion) dataset.
FeatureTable build_feature_table(const Dataset& dataset);

/// Column-wise min/max fitted on training rows.
struct ScalerParams {
    FeatureArray min{};
    FeatureArray max{};

    bool scaled(std::size_t i) const { return feature_kind(i) == FeatureKind::MinMaxScaled; }
    bool degenerate(std::size_t i) const { return scaled(i) && !(max[i] > min[i]); }

    nlohmann::json to_json() const;
    static ScalerParams from_json(const nlohmann::json& j);

    friend bool operator==(const ScalerParams&, const ScalerParams&) = default;
};

/// Requires at least one row (throws DataError otherwise). Only min-max columns
/// are fitted; ratio and binary columns keep min = 0, max = 1.
ScalerParams fit_scaler(std::span<const VisitFeatureVector> training_rows);

/// (x - min) / (max - min) clamped to [0, 1] for min-max columns; degenerate
/// columns map to 0. Ratio and binary columns pass through.
FeatureArray scale_vector(const VisitFeatureVector& v, const ScalerParams& s);

/// CSV export: 18 named columns plus `label`, values with 17 significant digits.
/// `comment`, when non-empty, is written first as a `# ` line.
void write_feature_csv(std::ostream& out, std::span<const VisitFeatureVector> rows, std::string_view comment = {});
void write_feature_csv(const std::filesystem::path& path, std::span<const VisitFeatureVector> rows,
                       std::string_view comment = {});
std::vector<VisitFeatureVector> read_feature_csv(const std::filesystem::path& path);

}  // namespace hlchoice::features
