#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "hlchoice/config.hpp"
#include "hlchoice/explain.hpp"
#include "hlchoice/neuralnet.hpp"
#include "hlchoice/pipeline.hpp"
#include "hlchoice/synthgen.hpp"

namespace hlchoice::cli {

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kUsage = 2,
    kBadConfig = 3,
    kMissingArtifact = 4,
    kParseFailure = 5,
    kDivergence = 6,
    kEmptyData = 7,
};

struct ExplainSettings {
    explain::Method method;
    explain::OutputMode output = explain::OutputMode::Probability;
    bool sample_background = false;
    std::size_t background_size = 100;
    std::size_t rows = 100;
    std::size_t local_rows = 5;
};

/// Everything one run needs, resolved from a KeyValueConfig.
struct RunConfig {
    KeyValueConfig source;
    std::uint64_t seed = 1;
    std::filesystem::path out_dir = "run";
    std::filesystem::path data_dir;  // defaults to <out_dir>/cohort
    synth::CohortSpec cohort;
    pipeline::SplitSpec split;
    nn::MlpConfig mlp;
    nn::AeConfig ae;
    nn::TrainConfig classifier_train;
    nn::TrainConfig ae_train;
    ExplainSettings explain;

    static RunConfig from_config(const KeyValueConfig& cfg);
    std::string hash_hex() const { return source.hash_hex(); }
};

/// Entry point shared by the executable and tests. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hlchoice::cli
