#pragma once

#include <filesystem>

#include <json.hpp>

#include "hlchoice/domain.hpp"

namespace hlchoice::ingest {

/// Locations of the nine input files.
struct DataPaths {
    std::filesystem::path visits;
    std::filesystem::path patients;
    std::filesystem::path providers;
    std::filesystem::path density;
    std::filesystem::path calendar;
    std::filesystem::path surgery_codes;
    std::filesystem::path er_codes;
    std::filesystem::path chronic_dx_codes;
    std::filesystem::path catastrophic_dx_codes;

    /// The standard file names inside `dir`.
    static DataPaths in_directory(const std::filesystem::path& dir);
};

/// Parses every file without applying exclusions. Duplicate registry rows for a
/// patient are merged; rows disagreeing on gender yield Gender::Conflicting and
/// rows disagreeing on birth date leave the birth date unset.
Dataset read_raw_dataset(const DataPaths& paths);

struct LoadResult {
    Dataset dataset;
    ExclusionAudit audit;
};

/// read_raw_dataset followed by apply_exclusions.
LoadResult load_dataset(const DataPaths& paths);

/// Writes `dataset` in the ingest file formats under `dir` (created if needed).
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

/// Throws CoverageError when `date` is not listed in the calendar.
bool is_workday(Date date, const WorkdayCalendar& calendar);

nlohmann::json audit_to_json(const ExclusionAudit& audit);
ExclusionAudit audit_from_json(const nlohmann::json& j);

}  // namespace hlchoice::ingest
