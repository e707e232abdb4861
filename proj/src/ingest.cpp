#include "hlchoice/ingest.hpp"

#include <fstream>
#include <map>

#include "hlchoice/csv.hpp"
#include "hlchoice/error.hpp"

namespace hlchoice::ingest {

namespace fs = std::filesystem;

DataPaths DataPaths::in_directory(const fs::path& dir) {
    return DataPaths{
        dir / "visits.csv",        dir / "patients.csv",         dir / "providers.csv",
        dir / "density.csv",       dir / "calendar.csv",         dir / "surgery_codes.txt",
        dir / "er_codes.txt",      dir / "chronic_dx_codes.txt", dir / "catastrophic_dx_codes.txt",
    };
}

namespace {

/// Field accessors that raise ParseError with file/line/column context.
class RowReader {
public:
    RowReader(const csv::Table& table, const csv::Row& row) : table_(table), row_(row) {}

    const std::string& text(std::string_view column) const { return row_.fields[table_.column(column)]; }

    [[noreturn]] void fail(std::string_view column, const std::string& what) const {
        throw ParseError(table_.file, row_.line, std::string(column), what);
    }

    std::optional<Date> optional_date(std::string_view column) const {
        const auto& t = text(column);
        if (t.empty()) return std::nullopt;
        auto d = Date::parse(t);
        if (!d) fail(column, "not an ISO-8601 date: '" + t + "'");
        return d;
    }

    Date date(std::string_view column) const {
        auto d = optional_date(column);
        if (!d) fail(column, "date is required");
        return *d;
    }

    bool flag(std::string_view column) const {
        const auto& t = text(column);
        if (t == "0") return false;
        if (t == "1") return true;
        fail(column, "expected 0 or 1, found '" + t + "'");
    }

    std::string required(std::string_view column) const {
        const auto& t = text(column);
        if (t.empty()) fail(column, "value is required");
        return t;
    }

private:
    const csv::Table& table_;
    const csv::Row& row_;
};

std::set<std::string> split_codes(const std::string& text) {
    std::set<std::string> out;
    if (text.empty()) return out;
    for (auto part : csv::split(text, '|')) {
        if (!part.empty()) out.emplace(part);
    }
    return out;
}

std::vector<PatientProfile> read_patients(const fs::path& path) {
    auto table = csv::read_table(path);
    std::map<std::string, PatientProfile> merged;
    std::map<std::string, bool> birth_conflict;
    for (const auto& row : table.rows) {
        RowReader r(table, row);
        PatientProfile p;
        p.patient_id = r.required("patient_id");
        p.birth_date = r.optional_date("birth_date");
        const auto& g = r.text("gender");
        if (g == "M") {
            p.gender = Gender::Male;
        } else if (g == "F") {
            p.gender = Gender::Female;
        } else if (g.empty()) {
            p.gender = Gender::Unknown;
        } else {
            r.fail("gender", "expected M, F or empty, found '" + g + "'");
        }
        p.low_income = r.flag("low_income");

        auto [it, inserted] = merged.try_emplace(p.patient_id, p);
        if (inserted) continue;
        PatientProfile& m = it->second;
        if (m.gender == Gender::Unknown) {
            m.gender = p.gender;
        } else if (p.gender != Gender::Unknown && p.gender != m.gender) {
            m.gender = Gender::Conflicting;
        }
        if (p.birth_date) {
            if (!m.birth_date && !birth_conflict[p.patient_id]) {
                m.birth_date = p.birth_date;
            } else if (m.birth_date && *m.birth_date != *p.birth_date) {
                m.birth_date.reset();
                birth_conflict[p.patient_id] = true;
            }
        }
        m.low_income = m.low_income || p.low_income;
    }
    std::vector<PatientProfile> out;
    out.reserve(merged.size());
    for (auto& [id, p] : merged) out.push_back(std::move(p));
    return out;
}

std::vector<ProviderProfile> read_providers(const fs::path& path) {
    auto table = csv::read_table(path);
    std::vector<ProviderProfile> out;
    std::set<std::string> seen;
    for (const auto& row : table.rows) {
        RowReader r(table, row);
        ProviderProfile p;
        p.provider_id = r.required("provider_id");
        if (!seen.insert(p.provider_id).second) r.fail("provider_id", "duplicate provider '" + p.provider_id + "'");
        const auto& level = r.text("level");
        if (!level.empty()) {
            auto code = csv::parse_int(level);
            auto parsed = code ? level_from_code(*code) : std::nullopt;
            if (!parsed) r.fail("level", "expected hospital level code 0-3, found '" + level + "'");
            p.level = parsed;
        }
        p.region_code = r.text("region_code");
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<RegionStats> read_density(const fs::path& path) {
    auto table = csv::read_table(path);
    std::vector<RegionStats> out;
    std::set<std::string> seen;
    for (const auto& row : table.rows) {
        RowReader r(table, row);
        RegionStats s;
        s.region_code = r.required("region_code");
        if (!seen.insert(s.region_code).second) r.fail("region_code", "duplicate region '" + s.region_code + "'");
        auto v = csv::parse_double(r.text("physician_density"));
        if (!v || *v < 0.0) r.fail("physician_density", "expected a nonnegative number");
        s.physician_density = *v;
        out.push_back(std::move(s));
    }
    return out;
}

WorkdayCalendar read_calendar(const fs::path& path) {
    auto table = csv::read_table(path);
    WorkdayCalendar cal;
    for (const auto& row : table.rows) {
        RowReader r(table, row);
        Date d = r.date("date");
        if (cal.covers(d)) r.fail("date", "duplicate calendar date " + d.iso());
        cal.set(d, r.flag("is_workday"));
    }
    return cal;
}

std::vector<VisitRecord> read_visits(const fs::path& path) {
    auto table = csv::read_table(path);
    std::vector<VisitRecord> out;
    out.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        RowReader r(table, row);
        VisitRecord v;
        v.patient_id = r.required("patient_id");
        v.provider_id = r.text("provider_id");
        v.visit_date = r.optional_date("date");
        v.primary_dx = r.text("primary_dx");
        v.dx_codes = split_codes(r.text("dx_codes"));
        if (!v.primary_dx.empty()) v.dx_codes.insert(v.primary_dx);
        v.treatment_codes = split_codes(r.text("treatment_codes"));
        const auto& triage = r.text("triage");
        if (!triage.empty()) {
            auto t = csv::parse_int(triage);
            if (!t || *t < 1 || *t > 5) r.fail("triage", "expected triage level 1-5, found '" + triage + "'");
            v.triage_level = static_cast<int>(*t);
        }
        v.catastrophic_illness = r.flag("catastrophic");
        const auto& setting = r.text("setting");
        if (setting == "outpatient") {
            v.setting = Setting::Outpatient;
        } else if (setting == "emergency") {
            v.setting = Setting::Emergency;
        } else {
            r.fail("setting", "expected outpatient or emergency, found '" + setting + "'");
        }
        out.push_back(std::move(v));
    }
    return out;
}

std::set<std::string> read_code_set(const fs::path& path) {
    auto lines = csv::read_lines(path);
    return {lines.begin(), lines.end()};
}

std::string join_codes(const std::set<std::string>& codes) {
    std::string out;
    for (const auto& c : codes) {
        if (!out.empty()) out.push_back('|');
        out += c;
    }
    return out;
}

std::ofstream open_for_write(const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    return out;
}

}  // namespace

Dataset read_raw_dataset(const DataPaths& paths) {
    Dataset ds;
    ds.patients = read_patients(paths.patients);
    ds.providers = read_providers(paths.providers);
    ds.region_stats = read_density(paths.density);
    ds.calendar = read_calendar(paths.calendar);
    ds.visits = read_visits(paths.visits);
    ds.code_sets.surgery_codes = read_code_set(paths.surgery_codes);
    ds.code_sets.er_codes = read_code_set(paths.er_codes);
    ds.code_sets.chronic_dx_codes = read_code_set(paths.chronic_dx_codes);
    ds.code_sets.catastrophic_dx_codes = read_code_set(paths.catastrophic_dx_codes);
    ds.canonicalize();
    return ds;
}

LoadResult load_dataset(const DataPaths& paths) {
    auto excluded = apply_exclusions(read_raw_dataset(paths));
    return LoadResult{std::move(excluded.clean), excluded.audit};
}

void write_dataset(const Dataset& ds, const fs::path& dir) {
    fs::create_directories(dir);
    const auto paths = DataPaths::in_directory(dir);

    {
        auto out = open_for_write(paths.patients);
        out << "patient_id,birth_date,gender,low_income\n";
        for (const auto& p : ds.patients) {
            const std::string birth = p.birth_date ? p.birth_date->iso() : "";
            const char* li = p.low_income ? "1" : "0";
            switch (p.gender) {
                case Gender::Male: out << p.patient_id << ',' << birth << ",M," << li << '\n'; break;
                case Gender::Female: out << p.patient_id << ',' << birth << ",F," << li << '\n'; break;
                case Gender::Unknown: out << p.patient_id << ',' << birth << ",," << li << '\n'; break;
                case Gender::Conflicting:
                    out << p.patient_id << ',' << birth << ",M," << li << '\n';
                    out << p.patient_id << ',' << birth << ",F," << li << '\n';
                    break;
            }
        }
    }
    {
        auto out = open_for_write(paths.providers);
        out << "provider_id,level,region_code\n";
        for (const auto& p : ds.providers) {
            out << p.provider_id << ',' << (p.level ? std::to_string(level_code(*p.level)) : "") << ','
                << p.region_code << '\n';
        }
    }
    {
        auto out = open_for_write(paths.density);
        out << "region_code,physician_density\n";
        for (const auto& r : ds.region_stats) {
            out << r.region_code << ',' << csv::format_double(r.physician_density) << '\n';
        }
    }
    {
        auto out = open_for_write(paths.calendar);
        out << "date,is_workday\n";
        for (const auto& [d, w] : ds.calendar.entries()) out << d.iso() << ',' << (w ? 1 : 0) << '\n';
    }
    {
        auto out = open_for_write(paths.visits);
        out << "patient_id,provider_id,date,primary_dx,dx_codes,treatment_codes,triage,catastrophic,setting\n";
        for (const auto& v : ds.visits) {
            out << v.patient_id << ',' << v.provider_id << ',' << (v.visit_date ? v.visit_date->iso() : "") << ','
                << v.primary_dx << ',' << join_codes(v.dx_codes) << ',' << join_codes(v.treatment_codes) << ','
                << (v.triage_level ? std::to_string(*v.triage_level) : "") << ','
                << (v.catastrophic_illness ? 1 : 0) << ','
                << (v.setting == Setting::Emergency ? "emergency" : "outpatient") << '\n';
        }
    }
    auto write_codes = [](const fs::path& path, const std::set<std::string>& codes) {
        auto out = open_for_write(path);
        for (const auto& c : codes) out << c << '\n';
    };
    write_codes(paths.surgery_codes, ds.code_sets.surgery_codes);
    write_codes(paths.er_codes, ds.code_sets.er_codes);
    write_codes(paths.chronic_dx_codes, ds.code_sets.chronic_dx_codes);
    write_codes(paths.catastrophic_dx_codes, ds.code_sets.catastrophic_dx_codes);
}

bool is_workday(Date date, const WorkdayCalendar& calendar) {
    auto it = calendar.entries().find(date);
    if (it == calendar.entries().end()) {
        throw CoverageError("date " + date.iso() + " is outside the workday calendar");
    }
    return it->second;
}

nlohmann::json audit_to_json(const ExclusionAudit& audit) {
    nlohmann::json j = nlohmann::json::object();
    for (auto r : kAllReasons) j[std::string(reason_name(r))] = audit[r];
    return j;
}

ExclusionAudit audit_from_json(const nlohmann::json& j) {
    ExclusionAudit audit;
    for (auto r : kAllReasons) audit[r] = j.value(std::string(reason_name(r)), std::size_t{0});
    return audit;
}

}  // namespace hlchoice::ingest
