#include "hlchoice/domain.hpp"

#include <algorithm>
#include <numeric>
#include <tuple>

#include "hlchoice/error.hpp"

namespace hlchoice {

std::optional<HospitalLevel> level_from_code(long long code) {
    if (code < 0 || code >= static_cast<long long>(kLevelCount)) return std::nullopt;
    return static_cast<HospitalLevel>(code);
}

std::string_view level_name(HospitalLevel level) {
    switch (level) {
        case HospitalLevel::MedicalCenter: return "MedicalCenter";
        case HospitalLevel::RegionalHospital: return "RegionalHospital";
        case HospitalLevel::DistrictHospital: return "DistrictHospital";
        case HospitalLevel::Clinic: return "Clinic";
    }
    return "?";
}

std::string_view reason_name(ExclusionReason reason) {
    switch (reason) {
        case ExclusionReason::MissingBirthOrGender: return "MissingBirthOrGender";
        case ExclusionReason::ConflictingGender: return "ConflictingGender";
        case ExclusionReason::MissingVisitDate: return "MissingVisitDate";
        case ExclusionReason::BirthAfterVisit: return "BirthAfterVisit";
        case ExclusionReason::NoVisits: return "NoVisits";
        case ExclusionReason::NoPrimaryDiagnosis: return "NoPrimaryDiagnosis";
        case ExclusionReason::IncompleteHospitalInfo: return "IncompleteHospitalInfo";
    }
    return "?";
}

std::optional<ExclusionReason> reason_from_name(std::string_view name) {
    for (auto r : kAllReasons) {
        if (reason_name(r) == name) return r;
    }
    return std::nullopt;
}

namespace {

template <typename T, typename Key>
const T* find_sorted(const std::vector<T>& items, std::string_view id, Key key) {
    auto it = std::lower_bound(items.begin(), items.end(), id,
                               [&](const T& item, std::string_view v) { return key(item) < v; });
    if (it == items.end() || key(*it) != id) return nullptr;
    return &*it;
}

}  // namespace

const PatientProfile* Dataset::find_patient(std::string_view id) const {
    return find_sorted(patients, id, [](const PatientProfile& p) -> std::string_view { return p.patient_id; });
}

const ProviderProfile* Dataset::find_provider(std::string_view id) const {
    return find_sorted(providers, id, [](const ProviderProfile& p) -> std::string_view { return p.provider_id; });
}

const RegionStats* Dataset::find_region(std::string_view code) const {
    return find_sorted(region_stats, code, [](const RegionStats& r) -> std::string_view { return r.region_code; });
}

void Dataset::canonicalize() {
    std::sort(patients.begin(), patients.end(),
              [](const auto& a, const auto& b) { return a.patient_id < b.patient_id; });
    std::sort(providers.begin(), providers.end(),
              [](const auto& a, const auto& b) { return a.provider_id < b.provider_id; });
    std::sort(region_stats.begin(), region_stats.end(),
              [](const auto& a, const auto& b) { return a.region_code < b.region_code; });
    std::stable_sort(visits.begin(), visits.end(), [](const VisitRecord& a, const VisitRecord& b) {
        return std::tie(a.patient_id, a.visit_date) < std::tie(b.patient_id, b.visit_date);
    });
}

std::size_t ExclusionAudit::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

Verdict validate_record(const VisitRecord& record, const PatientProfile* patient, const Dataset& index) {
    Verdict v;
    auto add = [&](ExclusionReason r) { v.reasons.push_back(r); };

    if (patient == nullptr || !patient->birth_date || patient->gender == Gender::Unknown) {
        add(ExclusionReason::MissingBirthOrGender);
    }
    if (patient != nullptr && patient->gender == Gender::Conflicting) add(ExclusionReason::ConflictingGender);
    if (!record.visit_date) {
        add(ExclusionReason::MissingVisitDate);
    } else if (patient != nullptr && patient->birth_date && *record.visit_date < *patient->birth_date) {
        add(ExclusionReason::BirthAfterVisit);
    }
    if (record.primary_dx.empty()) add(ExclusionReason::NoPrimaryDiagnosis);
    const ProviderProfile* provider = index.find_provider(record.provider_id);
    if (provider == nullptr || !provider->complete()) add(ExclusionReason::IncompleteHospitalInfo);
    return v;
}

ExclusionResult apply_exclusions(const Dataset& input) {
    Dataset sorted_copy;
    const Dataset* source = &input;
    auto by_id = [](const auto& a, const auto& b) { return a.patient_id < b.patient_id; };
    auto by_provider = [](const auto& a, const auto& b) { return a.provider_id < b.provider_id; };
    if (!std::is_sorted(input.patients.begin(), input.patients.end(), by_id) ||
        !std::is_sorted(input.providers.begin(), input.providers.end(), by_provider)) {
        sorted_copy = input;
        sorted_copy.canonicalize();
        source = &sorted_copy;
    }
    const Dataset& dataset = *source;

    ExclusionResult result;
    Dataset& clean = result.clean;
    clean.region_stats = dataset.region_stats;
    clean.calendar = dataset.calendar;
    clean.code_sets = dataset.code_sets;
    for (const auto& p : dataset.providers) {
        if (p.complete()) clean.providers.push_back(p);
    }

    // Pass 1: record-level rules.
    std::set<std::string, std::less<>> patients_with_visits;
    for (const auto& visit : dataset.visits) {
        Verdict verdict = validate_record(visit, dataset.find_patient(visit.patient_id), dataset);
        if (verdict.accepted()) {
            clean.visits.push_back(visit);
            patients_with_visits.insert(visit.patient_id);
        } else {
            for (auto r : verdict.reasons) ++result.audit[r];
        }
    }

    // Pass 2: patients left without any visit.
    for (const auto& p : dataset.patients) {
        if (patients_with_visits.contains(p.patient_id)) {
            clean.patients.push_back(p);
        } else {
            ++result.audit[ExclusionReason::NoVisits];
        }
    }

    clean.canonicalize();
    if (clean.visits.empty()) {
        throw DataError("no visits remain after applying exclusion rules");
    }
    return result;
}

}  // namespace hlchoice
