#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "hlchoice/domain.hpp"
#include "hlchoice/neuralnet.hpp"
#include "../oracles/nn_oracle.hpp"

namespace testing_support {

/// Fresh empty directory under the build tree, unique per name.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::current_path() / "scratch" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::vector<oracle::Layer> to_oracle(const hlchoice::nn::Network& net) {
    std::vector<oracle::Layer> out;
    for (const auto& l : net.layers()) {
        oracle::Layer o;
        o.w.assign(l.weights.rows(), std::vector<double>(l.weights.cols()));
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weights.cols(); ++c) o.w[r][c] = l.weights(r, c);
        }
        o.b.assign(l.biases.data(), l.biases.data() + l.biases.size());
        switch (l.activation) {
            case hlchoice::nn::Activation::Identity: o.act = oracle::Act::Identity; break;
            case hlchoice::nn::Activation::Relu: o.act = oracle::Act::Relu; break;
            case hlchoice::nn::Activation::Sigmoid: o.act = oracle::Act::Sigmoid; break;
            case hlchoice::nn::Activation::Softmax: o.act = oracle::Act::Softmax; break;
        }
        out.push_back(std::move(o));
    }
    return out;
}

/// Small clean dataset: two patients, three providers, one region each.
inline hlchoice::Dataset tiny_dataset() {
    using namespace hlchoice;
    Dataset d;
    d.patients = {{"P1", Date{1970, 5, 1}, Gender::Male, false}, {"P2", Date{1985, 1, 15}, Gender::Female, true}};
    d.providers = {{"A", HospitalLevel::Clinic, "R1"},
                   {"B", HospitalLevel::MedicalCenter, "R2"},
                   {"C", HospitalLevel::DistrictHospital, "R1"}};
    d.region_stats = {{"R1", 12.5}, {"R2", 30.0}};
    for (Date day{2010, 1, 1}; day <= Date{2010, 12, 31}; day = day.plus_days(1)) {
        d.calendar.set(day, day.iso_weekday_index() < 5);
    }
    d.code_sets.surgery_codes = {"S1"};
    d.code_sets.er_codes = {"E1"};
    d.code_sets.chronic_dx_codes = {"J45"};
    d.code_sets.catastrophic_dx_codes = {"C50"};
    auto visit = [](std::string p, std::string prov, Date date, std::string dx) {
        VisitRecord v;
        v.patient_id = std::move(p);
        v.provider_id = std::move(prov);
        v.visit_date = date;
        v.primary_dx = dx;
        v.dx_codes = {dx};
        return v;
    };
    d.visits = {visit("P1", "A", Date{2010, 4, 30}, "J06"), visit("P1", "A", Date{2010, 5, 3}, "J45"),
                visit("P1", "B", Date{2010, 6, 5}, "J06"),  visit("P2", "C", Date{2010, 2, 1}, "K29"),
                visit("P2", "A", Date{2010, 3, 1}, "K29")};
    d.visits[2].treatment_codes = {"S1"};
    d.visits[3].setting = Setting::Emergency;
    d.visits[3].triage_level = 2;
    d.canonicalize();
    return d;
}

}  // namespace testing_support
