#ifndef TWRB_EXPERIMENT_IO_HPP
#define TWRB_EXPERIMENT_IO_HPP

#include <string>
#include <vector>

#include "twrb/complexity.hpp"
#include "twrb/simulator.hpp"

namespace twrb {

// Everything one invocation needs; serialized next to the results so any
// run can be reproduced from its metadata alone.
struct RunManifest {
    std::string command;  // optimize | smi | ber | flops | sweep | selftest
    SystemConfig config;
    double p1_db = 10.0, p2_db = 10.0, pr_db = 10.0;  // as given, pre-conversion
    std::vector<double> sweep_db;
    int trials = 1000;
    int symbols = 10000;
    int relay_groups = 1;
    QlQrOptions options;
    int threads = 0;
    std::string out_dir = ".";
    std::string case_spec = "2,2,2x6";
    bool all_algorithms = false;
    std::string sweep_variable = "k";  // complexity sweeps
    int sweep_lo = 2, sweep_hi = 4, sweep_fixed = 2;

    bool operator==(const RunManifest& o) const;
};

std::string manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const std::string& text);

// Flat key-value config file (lines of `key value` or `key = value`,
// '#' comments). Unknown keys are an error. dB keys are converted to the
// linear fields once, here.
void apply_config_file(const std::string& path, RunManifest& m);

std::string experiment_csv(const ExperimentResult& result);

// Parses "2,2,2x6"-style case labels: antennas per user (all equal) times
// the total transmit antenna count.
FlopConfig parse_case_spec(const std::string& text);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace twrb

#endif
