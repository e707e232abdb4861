#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "hlchoice/date.hpp"

namespace hlchoice {

/// The four provider tiers. The underlying value is the stable serialized code.
enum class HospitalLevel : std::uint8_t {
    MedicalCenter = 0,
    RegionalHospital = 1,
    DistrictHospital = 2,
    Clinic = 3,
};

inline constexpr std::size_t kLevelCount = 4;

inline constexpr std::array<HospitalLevel, kLevelCount> kAllLevels{
    HospitalLevel::MedicalCenter, HospitalLevel::RegionalHospital, HospitalLevel::DistrictHospital,
    HospitalLevel::Clinic};

constexpr int level_code(HospitalLevel level) { return static_cast<int>(level); }
std::optional<HospitalLevel> level_from_code(long long code);
std::string_view level_name(HospitalLevel level);

/// Registry gender. `Conflicting` marks a beneficiary whose registry rows disagree.
enum class Gender : std::uint8_t { Male, Female, Unknown, Conflicting };

enum class Setting : std::uint8_t { Outpatient, Emergency };

struct PatientProfile {
    std::string patient_id;
    std::optional<Date> birth_date;
    Gender gender = Gender::Unknown;
    bool low_income = false;

    friend bool operator==(const PatientProfile&, const PatientProfile&) = default;
};

struct ProviderProfile {
    std::string provider_id;
    std::optional<HospitalLevel> level;  // absent = incomplete hospital information
    std::string region_code;             // empty = incomplete hospital information

    bool complete() const { return level.has_value() && !region_code.empty(); }

    friend bool operator==(const ProviderProfile&, const ProviderProfile&) = default;
};

struct VisitRecord {
    std::string patient_id;
    std::string provider_id;
    std::optional<Date> visit_date;
    std::string primary_dx;
    std::set<std::string> dx_codes;  // includes primary_dx when present
    std::set<std::string> treatment_codes;
    std::optional<int> triage_level;  // 1-5
    bool catastrophic_illness = false;
    Setting setting = Setting::Outpatient;

    friend bool operator==(const VisitRecord&, const VisitRecord&) = default;
};

struct RegionStats {
    std::string region_code;
    double physician_density = 0.0;  // practicing physicians per 10,000 residents

    friend bool operator==(const RegionStats&, const RegionStats&) = default;
};

enum class ExclusionReason : std::uint8_t {
    MissingBirthOrGender,
    ConflictingGender,
    MissingVisitDate,
    BirthAfterVisit,
    NoVisits,
    NoPrimaryDiagnosis,
    IncompleteHospitalInfo,
};

inline constexpr std::size_t kReasonCount = 7;

inline constexpr std::array<ExclusionReason, kReasonCount> kAllReasons{
    ExclusionReason::MissingBirthOrGender, ExclusionReason::ConflictingGender,
    ExclusionReason::MissingVisitDate,     ExclusionReason::BirthAfterVisit,
    ExclusionReason::NoVisits,             ExclusionReason::NoPrimaryDiagnosis,
    ExclusionReason::IncompleteHospitalInfo};

std::string_view reason_name(ExclusionReason reason);
std::optional<ExclusionReason> reason_from_name(std::string_view name);

/// Treatment and diagnosis code lists. Membership is exact string equality.
struct CodeSets {
    std::set<std::string> surgery_codes;
    std::set<std::string> er_codes;
    std::set<std::string> chronic_dx_codes;
    std::set<std::string> catastrophic_dx_codes;

    friend bool operator==(const CodeSets&, const CodeSets&) = default;
};

/// Explicit date -> workday table. Dates not listed are outside coverage.
class WorkdayCalendar {
public:
    void set(Date date, bool workday) { days_[date] = workday; }
    bool covers(Date date) const { return days_.contains(date); }
    bool empty() const { return days_.empty(); }
    const std::map<Date, bool>& entries() const { return days_; }

    friend bool operator==(const WorkdayCalendar&, const WorkdayCalendar&) = default;

private:
    std::map<Date, bool> days_;
};

/// Everything loaded from one set of input files.
///
/// Canonical order: patients and providers by id, visits by
/// (patient_id, visit_date, input order).
struct Dataset {
    std::vector<PatientProfile> patients;
    std::vector<ProviderProfile> providers;
    std::vector<VisitRecord> visits;
    std::vector<RegionStats> region_stats;
    WorkdayCalendar calendar;
    CodeSets code_sets;

    const PatientProfile* find_patient(std::string_view id) const;
    const ProviderProfile* find_provider(std::string_view id) const;
    const RegionStats* find_region(std::string_view code) const;

    /// Sorts every collection into canonical order (stable for visits).
    void canonicalize();

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Per-reason removal tallies. Record-level reasons count records; NoVisits counts patients.
struct ExclusionAudit {
    std::array<std::size_t, kReasonCount> counts{};

    std::size_t& operator[](ExclusionReason r) { return counts[static_cast<std::size_t>(r)]; }
    std::size_t operator[](ExclusionReason r) const { return counts[static_cast<std::size_t>(r)]; }
    std::size_t total() const;
    bool all_zero() const { return total() == 0; }

    friend bool operator==(const ExclusionAudit&, const ExclusionAudit&) = default;
};

/// Empty reasons = accepted.
struct Verdict {
    std::vector<ExclusionReason> reasons;
    bool accepted() const { return reasons.empty(); }
};

/// Checks one visit against the record-level exclusion rules. A null `patient`
/// means the beneficiary is absent from the registry, which is reported as
/// MissingBirthOrGender.
Verdict validate_record(const VisitRecord& record, const PatientProfile* patient, const Dataset& index);

struct ExclusionResult {
    Dataset clean;
    ExclusionAudit audit;
};

/// Two passes: record rules on every visit, then removal of patients left with
/// no visits. Incomplete providers are dropped from the clean dataset.
/// Throws DataError when nothing survives.
ExclusionResult apply_exclusions(const Dataset& dataset);

}  // namespace hlchoice
