#ifndef TWRB_MODEL_HPP
#define TWRB_MODEL_HPP

#include <cstdint>
#include <stdexcept>

#include "twrb/factor.hpp"
#include "twrb/matrix.hpp"
#include "twrb/rng.hpp"

namespace twrb {

// Raised when a sampled channel (after precoding) loses rank numerically;
// the trial is then redrawn with an incremented resample index.
class DegenerateChannel : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SystemConfig {
    int m = 2;            // antennas per source
    int n = 2;            // antennas per relay, n >= m
    double p1 = 10.0;     // source powers, linear watts
    double p2 = 10.0;
    double pr = 10.0;     // total relay power, linear watts
    double a = 0.5;       // relay power split in [0, 1]
    double sigma2 = 1.0;  // noise variance, linear watts
    std::uint64_t seed = 1;
    bool per_relay_power = false;  // false: single summed relay constraint

    void validate() const;
};

// rho_R = 1 / sqrt(p1 + p2)
double power_normalizer(double p1, double p2);

// The four Rayleigh channels of one trial; h(i, j) runs source j -> relay i,
// each N x M with i.i.d. CN(0, 1) entries.
struct ChannelRealization {
    Matrix h11, h12, h21, h22;
    const Matrix& h(int relay, int source) const;
};

ChannelRealization generate_channels(const SystemConfig& config, int trial, int resample = 0);

// Three-part relay amplifier F = f_left * f_center * f_right. The center
// factor is N x M with one real gain per stream at (N-M+k, k), aligned
// with the bottom-block triangle of the QL factors; for M = N this is an
// ordinary diagonal matrix.
struct RelayFilter {
    Matrix f_left;    // N x N unitary
    Matrix f_center;  // N x M, stream gains on the aligned diagonal
    Matrix f_right;   // M x N, orthonormal rows

    Matrix composed() const { return f_left * f_center * f_right; }
    std::vector<double> gains() const;
    void set_gains(const std::vector<double>& g);
};

// QL/QR factors of the precoded channels: H_i1 V1 = Q_li L_i (QL),
// H_i2 V2 = Q_ri R_i (QR), cached for the optimizer.
struct LinkFactors {
    QlFactorization ql1, ql2;
    QrFactorization qr1, qr2;
};

struct BeamformerState {
    Matrix v1, v2;        // M x M source precoders
    RelayFilter f1, f2;   // per-relay amplifiers
    Matrix w1, w2;        // M x M receive filters
    double rho_r = 1.0;
    LinkFactors factors;  // valid for the v1/v2 the filters were built from
};

// Raw-channel forms. destination selects the receiving
// source node; the transmit precoder of the opposite node is folded in.
Matrix equivalent_channel(const ChannelRealization& ch, const BeamformerState& s, int destination);
// Same channel before the far-end precoder, i.e. the map from the far
// transmit vector to the effective receive signal.
Matrix bare_equivalent_channel(const ChannelRealization& ch, const BeamformerState& s,
                               int destination);
Matrix noise_covariance(const ChannelRealization& ch, const BeamformerState& s, int destination,
                        double sigma2);

// Triangular forms for destination 1 built from the cached QL/QR factors.
// triangular_equivalent_channel equals V1^T * equivalent_channel(.., 1)
// exactly; the noise covariance carries the same congruence, so
// H^H C^-1 H agrees between the raw and triangular routes to rounding.
Matrix triangular_equivalent_channel(const BeamformerState& s);
Matrix triangular_noise_covariance(const BeamformerState& s, double sigma2);

// E[y_Ri y_Ri^H] at relay `which` (1 or 2) for unit-power symbols.
Matrix relay_input_covariance(const ChannelRealization& ch, const Matrix& v1, const Matrix& v2,
                              double sigma2, int which);
// D_i = rho_R^2 * relay_input_covariance.
Matrix relay_power_weight(const ChannelRealization& ch, const Matrix& v1, const Matrix& v2,
                          double sigma2, double rho_r, int which);
// tr(F1 D1 F1^H + F2 D2 F2^H), the modeled relay transmit power.
double relay_power_used(const ChannelRealization& ch, const BeamformerState& s, double sigma2);

struct NoiseDraws {
    Matrix n_r1, n_r2;  // N x 1 at the relays
    Matrix n1, n2;      // M x 1 at the sources
};

// Full two-slot chain with exact self-interference cancellation. Returns
// the effective receive vectors; with zero noise y1 = H~1 * x2.
std::pair<Matrix, Matrix> simulate_transmission(const ChannelRealization& ch,
                                                const BeamformerState& s, const Matrix& x1,
                                                const Matrix& x2, const NoiseDraws& noise);

struct AssembledFilters {
    RelayFilter f1, f2;
    LinkFactors factors;
};

// Matched three-part construction: F_Li = conj(Q_li), F_Ri = Q_ri^H, center
// gains at an equal split that meets the relay budget with equality.
AssembledFilters assemble_qlqr_filters(const ChannelRealization& ch, const Matrix& v1,
                                         const Matrix& v2, const SystemConfig& config);

// Power-constraint weights seen by the center gains: the M x M matrix
// Q_ri^H D_i Q_ri whose diagonal gives tr(F_i D_i F_i^H) = sum_k f_k^2 d_k.
Matrix center_power_weight(const ChannelRealization& ch, const BeamformerState& s, double sigma2,
                           int which);

}  // namespace twrb

#endif
