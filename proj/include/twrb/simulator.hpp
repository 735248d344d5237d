#ifndef TWRB_SIMULATOR_HPP
#define TWRB_SIMULATOR_HPP

#include <functional>
#include <string>
#include <vector>

#include "twrb/optimizer.hpp"

namespace twrb {

enum class ExperimentKind { SmiVsPr, SmiVsRelays, BerVsSnr };

struct ExperimentSpec {
    ExperimentKind kind = ExperimentKind::SmiVsPr;
    SystemConfig config;
    std::vector<double> sweep_db;  // relay power (SMI) or per-source SNR (BER), in dB
    int trials = 1000;
    int symbols_per_trial = 10000;  // BER only
    int relay_groups = 1;           // SmiVsRelays: Z/2 independent two-relay groups
    QlQrOptions options;
    int threads = 0;  // 0 = hardware concurrency

    void validate() const;
};

// One CSV-ready output row.
struct ExperimentRow {
    double point_db = 0.0;
    std::string metric;  // smi, ber, ber_svd_baseline, iterations
    double mean = 0.0;
    double std_err = 0.0;
    int trials_converged = 0;
    int trials_total = 0;
};

struct ExperimentResult {
    std::vector<ExperimentRow> rows;
    bool flagged = false;  // some point excluded >= 1% of its trials
};

// Negative sum mutual information log2|MSE1| + log2|MSE2| computed two
// ways: from the receive-filter MSE matrices (dense route) and through
// the Cholesky-whitened channel determinants (triangular route).
struct SmiSample {
    double bits_dense = 0.0;
    double bits_triangular = 0.0;
};
SmiSample smi_of_state(const ChannelRealization& ch, const BeamformerState& s, double sigma2);

ExperimentResult run_smi_experiment(const ExperimentSpec& spec);
ExperimentResult run_ber_experiment(const ExperimentSpec& spec);

// Checks that the product of squared triangular diagonal entries of the
// link-1 equivalent channel equals det(H1 H1^H) from its singular values.
struct SvdEquivalenceReport {
    double triangular_product = 0.0;
    double svd_product = 0.0;
    std::vector<double> normalized_spectrum;  // singular values over their geometric mean
};
SvdEquivalenceReport svd_equivalence_check(const BeamformerState& s, const ChannelRealization& ch);

// Comparison pipeline for the BER experiment: outer relay factors taken
// from SVD unitaries of the same precoded channels, center gains from the
// same det-max, then scaled so the gain products match the reference
// solution per relay.
BeamformerState svd_baseline_state(const ChannelRealization& ch, const SystemConfig& cfg,
                                   const BeamformerState& reference);

// Deterministic trial-indexed worker pool used by the experiments.
void parallel_for_trials(int n, int threads, const std::function<void(int)>& body);

}  // namespace twrb

#endif
