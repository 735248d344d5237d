#ifndef TWRB_OPTIMIZER_HPP
#define TWRB_OPTIMIZER_HPP

#include <vector>

#include "twrb/model.hpp"

namespace twrb {

struct MseReport {
    Matrix mse1, mse2;  // M x M Hermitian PSD, Wiener-optimal MSE matrices
    double tr1 = 0.0, tr2 = 0.0, sum = 0.0;
    int iteration = 0;
};

struct QlQrOptions {
    double tol = 1e-6;           // relative convergence on tr MSE1
    int max_iters = 100;
    int detmax_outer_rounds = 30;
    double balance_tol = 1e-3;   // relative gap |tr MSE1 - tr MSE2|
    bool debug_checks = false;   // assert triangular/raw agreement per iteration
};

// Wiener receive filter W = (H H^H + C)^-1 H, the stationary point of the
// per-link MSE for fixed channel and noise covariance.
Matrix wiener_receiver(const Matrix& h_eq, const Matrix& c_noise);

// MSE matrix of a linear receiver: (W^H H - I)(W^H H - I)^H + W^H C W.
Matrix mse_matrix(const Matrix& w, const Matrix& h_eq, const Matrix& c_noise);

// Wiener-optimal MSE matrices for both links computed through the matrix
// inversion lemma, [I + H^H C^-1 H]^-1.
MseReport link_mse(const ChannelRealization& ch, const BeamformerState& s, double sigma2);

struct PrecoderUpdate {
    Matrix v;
    bool fallback = false;  // multiplier search failed, power-capped identity used
    double mu_source = 0.0;
    double mu_relay = 0.0;
};

// Lagrangian precoder update for source `which` with everything else held
// fixed: V = (closed form in the dual variables), multipliers located by
// nested bisection (outer on the relay constraint, inner on the source
// power), negative eigenvalues of V V^H water-filled to zero.
PrecoderUpdate update_source_precoder(const ChannelRealization& ch, const BeamformerState& s,
                                      int which, const SystemConfig& cfg);

// Diagonal center-gain problem: maximize prod_k (l1 f1 r1 + l2 f2 r2) xi_k
// subject to sum_k d1 f1^2 + d2 f2^2 <= pr (or per-relay split budgets),
// with xi re-evaluated from the Cholesky of the candidate covariance in an
// outer fixed point.
struct DetMaxProblem {
    std::vector<double> l_diag1, l_diag2;  // QL bottom-block diagonals
    std::vector<double> r_diag1, r_diag2;  // QR diagonals
    Matrix d1, d2;                         // M x M center power weights
    double pr = 1.0;
    std::vector<double> xi_diag;           // diag of Xi^-1 at the warm start

    // Context for the xi fixed point; leave sigma2 <= 0 to keep xi frozen.
    Matrix l1_block, l2_block;  // M x M bottom blocks of the QL factors
    Matrix local_noise;         // V1^T V1^* term of the triangular covariance
    double sigma2 = 0.0;
    int outer_rounds = 30;

    bool per_relay = false;
    double split_a = 0.5;

    std::vector<double> f1_init, f2_init;  // warm start; empty = equal split
};

struct DetMaxResult {
    std::vector<double> f1, f2;
    bool converged = true;
    int outer_rounds_used = 0;
    double log_objective = 0.0;  // sum_k log((s1 + s2) xi)_k at the solution
};

DetMaxResult solve_detmax(const DetMaxProblem& p);

// Equalizes the two links' MSE traces by scaling down the precoder that
// serves the stronger link; never scales up.
BeamformerState balance_mse(const ChannelRealization& ch, const BeamformerState& s,
                            const SystemConfig& cfg, double balance_tol);

struct QlQrOutcome {
    BeamformerState state;
    std::vector<MseReport> history;  // entry 0 is the initial point
    bool converged = false;
    int iterations = 0;
    int detmax_flags = 0;    // det-max inner solver hit its round limit
    int fallback_flags = 0;  // precoder updates that used the fallback
};

// Alternating design loop: receivers (Wiener), precoders (Lagrangian
// closed form), QL/QR refactorization, center gains (det-max), MSE
// balancing; iterates until tr MSE1 settles. Monotone by construction: an
// iterate that fails to improve is discarded and the loop stops.
QlQrOutcome run_qlqr(const ChannelRealization& ch, const SystemConfig& cfg,
                     const QlQrOptions& opt = {});

// run_qlqr plus channel generation with degenerate-channel resampling.
struct TrialOutcome {
    QlQrOutcome outcome;
    ChannelRealization channels;
    int resamples = 0;
};
TrialOutcome run_trial(const SystemConfig& cfg, int trial, const QlQrOptions& opt = {});

}  // namespace twrb

#endif
