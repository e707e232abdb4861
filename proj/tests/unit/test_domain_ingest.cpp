#include <gtest/gtest.h>

#include <algorithm>

#include "hlchoice/domain.hpp"
#include "hlchoice/error.hpp"
#include "hlchoice/ingest.hpp"
#include "support.hpp"

using namespace hlchoice;
using testing_support::read_file;
using testing_support::scratch_dir;
using testing_support::tiny_dataset;
using testing_support::write_file;

namespace {

bool has_reason(const Verdict& v, ExclusionReason r) {
    return std::find(v.reasons.begin(), v.reasons.end(), r) != v.reasons.end();
}

}  // namespace

TEST(Levels, CodesAndNames) {
    for (auto level : kAllLevels) EXPECT_EQ(level_from_code(level_code(level)), level);
    EXPECT_FALSE(level_from_code(4).has_value());
    EXPECT_FALSE(level_from_code(-1).has_value());
    for (auto r : kAllReasons) EXPECT_EQ(reason_from_name(reason_name(r)), r);
}

TEST(Validate, CleanRecordAccepted) {
    const auto d = tiny_dataset();
    for (const auto& v : d.visits) EXPECT_TRUE(validate_record(v, d.find_patient(v.patient_id), d).accepted());
}

TEST(Validate, EachRuleFires) {
    auto d = tiny_dataset();
    VisitRecord v = d.visits.front();

    PatientProfile p = *d.find_patient(v.patient_id);
    p.birth_date.reset();
    EXPECT_TRUE(has_reason(validate_record(v, &p, d), ExclusionReason::MissingBirthOrGender));
    p = *d.find_patient(v.patient_id);
    p.gender = Gender::Unknown;
    EXPECT_TRUE(has_reason(validate_record(v, &p, d), ExclusionReason::MissingBirthOrGender));
    p.gender = Gender::Conflicting;
    EXPECT_EQ(validate_record(v, &p, d).reasons, std::vector{ExclusionReason::ConflictingGender});

    VisitRecord w = v;
    w.visit_date.reset();
    EXPECT_EQ(validate_record(w, d.find_patient(w.patient_id), d).reasons,
              std::vector{ExclusionReason::MissingVisitDate});
    w = v;
    w.visit_date = Date{1960, 1, 1};
    EXPECT_EQ(validate_record(w, d.find_patient(w.patient_id), d).reasons,
              std::vector{ExclusionReason::BirthAfterVisit});
    w = v;
    w.primary_dx.clear();
    EXPECT_EQ(validate_record(w, d.find_patient(w.patient_id), d).reasons,
              std::vector{ExclusionReason::NoPrimaryDiagnosis});
    w = v;
    w.provider_id = "ZZZ";
    EXPECT_EQ(validate_record(w, d.find_patient(w.patient_id), d).reasons,
              std::vector{ExclusionReason::IncompleteHospitalInfo});
}

TEST(Validate, UnknownPatientAndIncompleteProvider) {
    auto d = tiny_dataset();
    VisitRecord v = d.visits.front();
    EXPECT_TRUE(has_reason(validate_record(v, nullptr, d), ExclusionReason::MissingBirthOrGender));
    d.providers[0].region_code.clear();
    d.canonicalize();
    const VisitRecord& at_a = *std::find_if(d.visits.begin(), d.visits.end(),
                                            [](const VisitRecord& x) { return x.provider_id == "A"; });
    EXPECT_TRUE(has_reason(validate_record(at_a, d.find_patient(at_a.patient_id), d),
                           ExclusionReason::IncompleteHospitalInfo));
}

TEST(Validate, BirthOnVisitDayIsAccepted) {
    auto d = tiny_dataset();
    VisitRecord v = d.visits.front();
    v.visit_date = d.find_patient(v.patient_id)->birth_date;
    EXPECT_TRUE(validate_record(v, d.find_patient(v.patient_id), d).accepted());
}

TEST(Exclusions, TwoPassPatientRemoval) {
    auto d = tiny_dataset();
    for (auto& v : d.visits) {
        if (v.patient_id == "P2") v.primary_dx.clear();
    }
    const auto r = apply_exclusions(d);
    EXPECT_EQ(r.audit[ExclusionReason::NoPrimaryDiagnosis], 2u);
    EXPECT_EQ(r.audit[ExclusionReason::NoVisits], 1u);
    EXPECT_EQ(r.audit.total(), 3u);
    ASSERT_EQ(r.clean.patients.size(), 1u);
    EXPECT_EQ(r.clean.patients[0].patient_id, "P1");
    EXPECT_EQ(r.clean.visits.size(), 3u);
}

TEST(Exclusions, CleanDatasetUntouchedAndIdempotent) {
    const auto d = tiny_dataset();
    const auto once = apply_exclusions(d);
    EXPECT_TRUE(once.audit.all_zero());
    EXPECT_EQ(once.clean, d);
    const auto twice = apply_exclusions(once.clean);
    EXPECT_TRUE(twice.audit.all_zero());
    EXPECT_EQ(twice.clean, once.clean);
}

TEST(Exclusions, OrderIndependent) {
    auto d = tiny_dataset();
    d.visits[1].visit_date.reset();
    d.patients.push_back({"P0", Date{1990, 1, 1}, Gender::Female, false});
    auto shuffled = d;
    std::reverse(shuffled.visits.begin(), shuffled.visits.end());
    std::reverse(shuffled.patients.begin(), shuffled.patients.end());
    std::reverse(shuffled.providers.begin(), shuffled.providers.end());
    const auto a = apply_exclusions(d);
    const auto b = apply_exclusions(shuffled);
    EXPECT_EQ(a.audit, b.audit);
    EXPECT_EQ(a.clean, b.clean);
    EXPECT_EQ(a.audit[ExclusionReason::NoVisits], 1u);
    EXPECT_EQ(a.audit[ExclusionReason::MissingVisitDate], 1u);
}

TEST(Exclusions, NothingLeftIsAnError) {
    auto d = tiny_dataset();
    for (auto& v : d.visits) v.visit_date.reset();
    EXPECT_THROW(apply_exclusions(d), DataError);
}

TEST(Ingest, RoundTrip) {
    const auto dir = scratch_dir("ingest_round_trip");
    const auto d = tiny_dataset();
    ingest::write_dataset(d, dir);
    const auto raw = ingest::read_raw_dataset(ingest::DataPaths::in_directory(dir));
    EXPECT_EQ(raw, d);
    const auto loaded = ingest::load_dataset(ingest::DataPaths::in_directory(dir));
    EXPECT_TRUE(loaded.audit.all_zero());
    EXPECT_EQ(loaded.dataset, d);
}

TEST(Ingest, DuplicateRegistryRowsWithDifferentGenderConflict) {
    const auto dir = scratch_dir("ingest_conflict");
    auto d = tiny_dataset();
    d.patients[1].gender = Gender::Conflicting;
    ingest::write_dataset(d, dir);
    const auto loaded = ingest::load_dataset(ingest::DataPaths::in_directory(dir));
    EXPECT_EQ(loaded.audit[ExclusionReason::ConflictingGender], 2u);
    EXPECT_EQ(loaded.audit[ExclusionReason::NoVisits], 1u);
    EXPECT_EQ(loaded.dataset.patients.size(), 1u);
}

TEST(Ingest, ParseErrorNamesFileLineAndField) {
    const auto dir = scratch_dir("ingest_parse");
    ingest::write_dataset(tiny_dataset(), dir);
    write_file(dir / "visits.csv",
               "patient_id,provider_id,date,primary_dx,dx_codes,treatment_codes,triage,catastrophic,setting\n"
               "P1,A,2010-04-30,J06,J06,,,0,outpatient\n"
               "P1,A,2010-13-01,J06,J06,,,0,outpatient\n");
    try {
        ingest::read_raw_dataset(ingest::DataPaths::in_directory(dir));
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
        EXPECT_EQ(e.field(), "date");
        EXPECT_NE(std::string(e.what()).find("visits.csv"), std::string::npos);
    }
    write_file(dir / "visits.csv",
               "patient_id,provider_id,date,primary_dx,dx_codes,treatment_codes,triage,catastrophic,setting\n"
               "P1,A,2010-04-30,J06,J06,,9,0,outpatient\n");
    EXPECT_THROW(ingest::read_raw_dataset(ingest::DataPaths::in_directory(dir)), ParseError);
}

TEST(Ingest, MissingColumnAndFile) {
    const auto dir = scratch_dir("ingest_missing");
    ingest::write_dataset(tiny_dataset(), dir);
    write_file(dir / "density.csv", "region_code\nR1\n");
    try {
        ingest::read_raw_dataset(ingest::DataPaths::in_directory(dir));
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.field(), "physician_density");
    }
    std::filesystem::remove(dir / "density.csv");
    EXPECT_THROW(ingest::read_raw_dataset(ingest::DataPaths::in_directory(dir)), MissingInputError);
}

TEST(Ingest, WriteIsDeterministic) {
    const auto a = scratch_dir("ingest_det_a");
    const auto b = scratch_dir("ingest_det_b");
    ingest::write_dataset(tiny_dataset(), a);
    ingest::write_dataset(tiny_dataset(), b);
    for (const auto& name : {"visits.csv", "patients.csv", "providers.csv", "calendar.csv"}) {
        EXPECT_EQ(read_file(a / name), read_file(b / name)) << name;
    }
}

TEST(Calendar, LookupAndCoverage) {
    const auto d = tiny_dataset();
    EXPECT_TRUE(ingest::is_workday(Date{2010, 5, 3}, d.calendar));    // Monday
    EXPECT_FALSE(ingest::is_workday(Date{2010, 6, 5}, d.calendar));   // Saturday
    EXPECT_THROW(ingest::is_workday(Date{2011, 1, 3}, d.calendar), CoverageError);
}

TEST(Audit, JsonRoundTrip) {
    ExclusionAudit a;
    for (std::size_t i = 0; i < kReasonCount; ++i) a.counts[i] = 10 * i + 1;
    const auto j = ingest::audit_to_json(a);
    EXPECT_EQ(j.at("NoVisits"), 41u);
    EXPECT_EQ(ingest::audit_from_json(j), a);
}
