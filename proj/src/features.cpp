#include "hlchoice/features.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>

#include "hlchoice/csv.hpp"
#include "hlchoice/error.hpp"
#include "hlchoice/ingest.hpp"

namespace hlchoice::features {

FeatureKind feature_kind(Feature f) {
    switch (f) {
        case Feature::Age:
        case Feature::TotalVisits:
        case Feature::TotalDiseases:
        case Feature::TotalChronicDiseases:
        case Feature::PhysicianDensity:
        case Feature::Mfpc:
        case Feature::Lfpc:
            return FeatureKind::MinMaxScaled;
        case Feature::Upc:
        case Feature::Lupc:
        case Feature::Secoc:
        case Feature::Coci:
        case Feature::Dir:
            return FeatureKind::Ratio;
        case Feature::Male:
        case Feature::LowIncome:
        case Feature::IsSurgery:
        case Feature::IsEr:
        case Feature::IsSevere:
        case Feature::IsWorkday:
            return FeatureKind::Binary;
    }
    return FeatureKind::Binary;
}

VisitSequence::VisitSequence(std::string patient_id, std::vector<std::string> providers)
    : patient_id_(std::move(patient_id)), providers_(std::move(providers)) {
    for (const auto& p : providers_) ++counts_[p];
}

ContinuityIndices continuity_indices(const VisitSequence& seq) {
    const std::size_t n = seq.total();
    if (n == 0) throw DataError("continuity indices need at least one visit (patient '" + seq.patient_id() + "')");

    std::size_t most = 0;
    std::size_t least = n;
    double sum_sq = 0.0;
    for (const auto& [provider, count] : seq.counts()) {
        most = std::max(most, count);
        least = std::min(least, count);
        sum_sq += static_cast<double>(count) * static_cast<double>(count);
    }

    const double N = static_cast<double>(n);
    ContinuityIndices c;
    c.upc = static_cast<double>(most) / N;
    c.lupc = static_cast<double>(least) / N;
    if (n == 1) {
        c.secoc = 1.0;
        c.coci = 1.0;
        return c;
    }
    std::size_t same = 0;
    const auto& p = seq.providers();
    for (std::size_t j = 0; j + 1 < n; ++j) {
        if (p[j] == p[j + 1]) ++same;
    }
    c.secoc = static_cast<double>(same) / (N - 1.0);
    c.coci = (sum_sq - N) / (N * (N - 1.0));
    return c;
}

void VoteTable::add_mfpc(const std::string& provider) {
    auto& v = votes_[provider];
    v.provider_id = provider;
    ++v.mfpc;
}

void VoteTable::add_lfpc(const std::string& provider) {
    auto& v = votes_[provider];
    v.provider_id = provider;
    ++v.lfpc;
}

std::size_t VoteTable::mfpc(std::string_view provider) const {
    auto it = votes_.find(provider);
    return it == votes_.end() ? 0 : it->second.mfpc;
}

std::size_t VoteTable::lfpc(std::string_view provider) const {
    auto it = votes_.find(provider);
    return it == votes_.end() ? 0 : it->second.lfpc;
}

VoteTable provider_votes(std::span<const VisitSequence> sequences) {
    VoteTable table;
    for (const auto& seq : sequences) {
        if (seq.total() == 0) continue;
        // counts() iterates in ascending id order, so strict comparisons keep the smallest id on ties.
        const std::string* usual = nullptr;
        const std::string* least = nullptr;
        std::size_t usual_n = 0;
        std::size_t least_n = 0;
        for (const auto& [provider, count] : seq.counts()) {
            if (usual == nullptr || count > usual_n) {
                usual = &provider;
                usual_n = count;
            }
            if (least == nullptr || count < least_n) {
                least = &provider;
                least_n = count;
            }
        }
        table.add_mfpc(*usual);
        table.add_lfpc(*least);
    }
    return table;
}

double disease_importance_rate(std::span<const VisitRecord> patient_visits, const VisitRecord& target) {
    if (patient_visits.empty()) return 0.0;
    const auto same = std::count_if(patient_visits.begin(), patient_visits.end(),
                                    [&](const VisitRecord& v) { return v.primary_dx == target.primary_dx; });
    return static_cast<double>(same) / static_cast<double>(patient_visits.size());
}

IncidentFlags incident_flags(const VisitRecord& record, const CodeSets& codes, const WorkdayCalendar& calendar) {
    if (!record.visit_date) throw DataError("visit without a date reached feature computation");
    IncidentFlags f;
    for (const auto& t : record.treatment_codes) {
        if (codes.surgery_codes.contains(t)) f.is_surgery = true;
        if (codes.er_codes.contains(t)) f.is_er = true;
    }
    if (record.setting == Setting::Emergency) f.is_er = true;
    const bool severe_triage = record.triage_level && *record.triage_level >= 1 && *record.triage_level <= 3;
    f.is_severe = severe_triage || record.catastrophic_illness ||
                  codes.catastrophic_dx_codes.contains(record.primary_dx);
    f.is_workday = ingest::is_workday(*record.visit_date, calendar);
    return f;
}

PatientSummary summarize_patient(std::span<const VisitRecord> patient_visits, const CodeSets& codes) {
    PatientSummary s;
    s.total_visits = patient_visits.size();
    std::set<std::string_view> diseases;
    std::vector<std::string> providers;
    providers.reserve(patient_visits.size());
    for (const auto& v : patient_visits) {
        for (const auto& d : v.dx_codes) diseases.insert(d);
        providers.push_back(v.provider_id);
    }
    s.total_diseases = diseases.size();
    s.total_chronic_diseases = static_cast<std::size_t>(std::count_if(
        diseases.begin(), diseases.end(), [&](std::string_view d) { return codes.chronic_dx_codes.contains(std::string(d)); }));
    s.indices = continuity_indices(VisitSequence(patient_visits.empty() ? "" : patient_visits.front().patient_id,
                                                 std::move(providers)));
    return s;
}

FeatureArray VisitFeatureVector::values() const {
    auto b = [](bool x) { return x ? 1.0 : 0.0; };
    return {age,  b(male), b(low_income), total_visits, total_diseases, total_chronic_diseases,
            upc,  lupc,    secoc,         coci,         physician_density, mfpc,
            lfpc, b(is_surgery), b(is_er), b(is_severe), b(is_workday), dir};
}

VisitFeatureVector VisitFeatureVector::from_values(const FeatureArray& x, HospitalLevel label) {
    VisitFeatureVector v;
    v.age = x[0];
    v.male = x[1] != 0.0;
    v.low_income = x[2] != 0.0;
    v.total_visits = x[3];
    v.total_diseases = x[4];
    v.total_chronic_diseases = x[5];
    v.upc = x[6];
    v.lupc = x[7];
    v.secoc = x[8];
    v.coci = x[9];
    v.physician_density = x[10];
    v.mfpc = x[11];
    v.lfpc = x[12];
    v.is_surgery = x[13] != 0.0;
    v.is_er = x[14] != 0.0;
    v.is_severe = x[15] != 0.0;
    v.is_workday = x[16] != 0.0;
    v.dir = x[17];
    v.label = label;
    return v;
}

VisitFeatureVector assemble_visit_vector(const VisitRecord& record, const PatientProfile& patient,
                                         const ProviderProfile& provider, const PatientSummary& summary,
                                         const VoteTable& votes, std::span<const RegionStats> regions, double dir,
                                         const IncidentFlags& flags) {
    if (!record.visit_date || !patient.birth_date) throw DataError("visit or birth date missing at feature time");
    if (!provider.level) throw DataError("provider '" + provider.provider_id + "' has no hospital level");
    auto region = std::find_if(regions.begin(), regions.end(),
                               [&](const RegionStats& r) { return r.region_code == provider.region_code; });
    if (region == regions.end()) {
        throw DataError("region '" + provider.region_code + "' of provider '" + provider.provider_id +
                        "' has no physician density entry");
    }

    VisitFeatureVector v;
    v.age = whole_years_between(*patient.birth_date, *record.visit_date);
    v.male = patient.gender == Gender::Male;
    v.low_income = patient.low_income;
    v.total_visits = static_cast<double>(summary.total_visits);
    v.total_diseases = static_cast<double>(summary.total_diseases);
    v.total_chronic_diseases = static_cast<double>(summary.total_chronic_diseases);
    v.upc = summary.indices.upc;
    v.lupc = summary.indices.lupc;
    v.secoc = summary.indices.secoc;
    v.coci = summary.indices.coci;
    v.physician_density = region->physician_density;
    v.mfpc = static_cast<double>(votes.mfpc(provider.provider_id));
    v.lfpc = static_cast<double>(votes.lfpc(provider.provider_id));
    v.is_surgery = flags.is_surgery;
    v.is_er = flags.is_er;
    v.is_severe = flags.is_severe;
    v.is_workday = flags.is_workday;
    v.dir = dir;
    v.label = *provider.level;
    return v;
}

namespace {

/// [begin, end) ranges of each patient's visits in a canonically sorted visit list.
std::vector<std::pair<std::size_t, std::size_t>> patient_ranges(const std::vector<VisitRecord>& visits) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    std::size_t start = 0;
    for (std::size_t i = 1; i <= visits.size(); ++i) {
        if (i == visits.size() || visits[i].patient_id != visits[start].patient_id) {
            out.emplace_back(start, i);
            start = i;
        }
    }
    if (visits.empty()) out.clear();
    return out;
}

}  // namespace

FeatureTable build_feature_table(const Dataset& dataset) {
    const auto ranges = patient_ranges(dataset.visits);
    std::span<const VisitRecord> all(dataset.visits);

    std::vector<VisitSequence> sequences;
    sequences.reserve(ranges.size());
    for (auto [b, e] : ranges) {
        std::vector<std::string> providers;
        providers.reserve(e - b);
        for (std::size_t i = b; i < e; ++i) providers.push_back(dataset.visits[i].provider_id);
        sequences.emplace_back(dataset.visits[b].patient_id, std::move(providers));
    }
    const VoteTable votes = provider_votes(sequences);

    FeatureTable table;
    table.rows.reserve(dataset.visits.size());
    table.patient_ids.reserve(dataset.visits.size());
    for (auto [b, e] : ranges) {
        auto visits = all.subspan(b, e - b);
        const PatientProfile* patient = dataset.find_patient(visits.front().patient_id);
        if (patient == nullptr) throw DataError("visit references unknown patient '" + visits.front().patient_id + "'");
        const PatientSummary summary = summarize_patient(visits, dataset.code_sets);

        std::map<std::string_view, std::size_t> dx_counts;
        for (const auto& v : visits) ++dx_counts[v.primary_dx];

        for (const auto& v : visits) {
            const ProviderProfile* provider = dataset.find_provider(v.provider_id);
            if (provider == nullptr) throw DataError("visit references unknown provider '" + v.provider_id + "'");
            const double dir = static_cast<double>(dx_counts[v.primary_dx]) / static_cast<double>(visits.size());
            const IncidentFlags flags = incident_flags(v, dataset.code_sets, dataset.calendar);
            table.rows.push_back(
                assemble_visit_vector(v, *patient, *provider, summary, votes, dataset.region_stats, dir, flags));
            table.patient_ids.push_back(v.patient_id);
        }
    }
    return table;
}

nlohmann::json ScalerParams::to_json() const {
    nlohmann::json cols = nlohmann::json::array();
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        cols.push_back({{"name", kFeatureNames[i]}, {"min", min[i]}, {"max", max[i]}, {"scaled", scaled(i)}});
    }
    return {{"features", cols}};
}

ScalerParams ScalerParams::from_json(const nlohmann::json& j) {
    const auto& cols = j.at("features");
    if (cols.size() != kFeatureCount) throw DataError("scaler file must list 18 features");
    ScalerParams s;
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        if (cols[i].at("name").get<std::string>() != kFeatureNames[i]) {
            throw DataError("scaler feature order mismatch at column " + std::to_string(i));
        }
        s.min[i] = cols[i].at("min").get<double>();
        s.max[i] = cols[i].at("max").get<double>();
    }
    return s;
}

ScalerParams fit_scaler(std::span<const VisitFeatureVector> rows) {
    if (rows.empty()) throw DataError("cannot fit a scaler on zero rows");
    ScalerParams s;
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        s.min[i] = 0.0;
        s.max[i] = 1.0;
    }
    bool first = true;
    for (const auto& r : rows) {
        const auto x = r.values();
        for (std::size_t i = 0; i < kFeatureCount; ++i) {
            if (!s.scaled(i)) continue;
            if (first) {
                s.min[i] = s.max[i] = x[i];
            } else {
                s.min[i] = std::min(s.min[i], x[i]);
                s.max[i] = std::max(s.max[i], x[i]);
            }
        }
        first = false;
    }
    return s;
}

FeatureArray scale_vector(const VisitFeatureVector& v, const ScalerParams& s) {
    FeatureArray x = v.values();
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        if (!s.scaled(i)) continue;
        if (s.degenerate(i)) {
            x[i] = 0.0;
        } else {
            x[i] = std::clamp((x[i] - s.min[i]) / (s.max[i] - s.min[i]), 0.0, 1.0);
        }
    }
    return x;
}

void write_feature_csv(std::ostream& out, std::span<const VisitFeatureVector> rows, std::string_view comment) {
    if (!comment.empty()) out << "# " << comment << '\n';
    for (std::size_t i = 0; i < kFeatureCount; ++i) out << kFeatureNames[i] << ',';
    out << "label\n";
    for (const auto& r : rows) {
        for (double x : r.values()) out << csv::format_double(x) << ',';
        out << level_code(r.label) << '\n';
    }
}

void write_feature_csv(const std::filesystem::path& path, std::span<const VisitFeatureVector> rows,
                       std::string_view comment) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    write_feature_csv(out, rows, comment);
}

std::vector<VisitFeatureVector> read_feature_csv(const std::filesystem::path& path) {
    auto table = csv::read_table(path);
    std::array<std::size_t, kFeatureCount> cols{};
    for (std::size_t i = 0; i < kFeatureCount; ++i) cols[i] = table.column(kFeatureNames[i]);
    const std::size_t label_col = table.column("label");
    std::vector<VisitFeatureVector> out;
    out.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        FeatureArray x{};
        for (std::size_t i = 0; i < kFeatureCount; ++i) {
            auto v = csv::parse_double(row.fields[cols[i]]);
            if (!v) throw ParseError(table.file, row.line, std::string(kFeatureNames[i]), "not a number");
            x[i] = *v;
        }
        auto code = csv::parse_int(row.fields[label_col]);
        auto level = code ? level_from_code(*code) : std::nullopt;
        if (!level) throw ParseError(table.file, row.line, "label", "expected hospital level code 0-3");
        out.push_back(VisitFeatureVector::from_values(x, *level));
    }
    return out;
}

}  // namespace hlchoice::features
