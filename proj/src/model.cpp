#include "twrb/model.hpp"

#include <cmath>
#include <string>

namespace twrb {

void SystemConfig::validate() const {
    if (m < 1) throw std::invalid_argument("m must be >= 1");
    if (n < m) throw std::invalid_argument("n must be >= m");
    if (!(p1 > 0.0) || !(p2 > 0.0) || !(pr > 0.0))
        throw std::invalid_argument("powers must be positive");
    if (!(sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be positive");
    if (!(a >= 0.0 && a <= 1.0)) throw std::invalid_argument("relay split a must be in [0, 1]");
}

double power_normalizer(double p1, double p2) {
    if (!(p1 > 0.0) || !(p2 > 0.0))
        throw std::invalid_argument("power_normalizer requires positive powers");
    return 1.0 / std::sqrt(p1 + p2);
}

const Matrix& ChannelRealization::h(int relay, int source) const {
    if (relay == 1 && source == 1) return h11;
    if (relay == 1 && source == 2) return h12;
    if (relay == 2 && source == 1) return h21;
    if (relay == 2 && source == 2) return h22;
    throw std::invalid_argument("channel index out of range");
}

ChannelRealization generate_channels(const SystemConfig& config, int trial, int resample) {
    config.validate();
    RandomStream rs(config.seed, static_cast<std::uint64_t>(trial), RandomStream::kChannels,
                    static_cast<std::uint64_t>(resample));
    const int n = config.n, m = config.m;
    auto fill = [&](int which) {
        Matrix h(n, m);
        std::uint64_t base = static_cast<std::uint64_t>(which) * static_cast<std::uint64_t>(n * m);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j)
                h(i, j) = rs.cgaussian(base + static_cast<std::uint64_t>(i * m + j));
        return h;
    };
    ChannelRealization ch;
    ch.h11 = fill(0);
    ch.h12 = fill(1);
    ch.h21 = fill(2);
    ch.h22 = fill(3);
    return ch;
}

std::vector<double> RelayFilter::gains() const {
    const int n = f_center.rows(), m = f_center.cols();
    std::vector<double> g(static_cast<size_t>(m));
    for (int k = 0; k < m; ++k) g[static_cast<size_t>(k)] = f_center(n - m + k, k).real();
    return g;
}

void RelayFilter::set_gains(const std::vector<double>& g) {
    const int n = f_center.rows(), m = f_center.cols();
    if (static_cast<int>(g.size()) != m) throw std::invalid_argument("gain count mismatch");
    f_center = Matrix(n, m);
    for (int k = 0; k < m; ++k) f_center(n - m + k, k) = g[static_cast<size_t>(k)];
}

Matrix bare_equivalent_channel(const ChannelRealization& ch, const BeamformerState& s,
                               int destination) {
    Matrix f1 = s.f1.composed();
    Matrix f2 = s.f2.composed();
    if (destination == 1)
        return ch.h11.transpose() * f1 * ch.h12 + ch.h21.transpose() * f2 * ch.h22;
    if (destination == 2)
        return ch.h12.transpose() * f1 * ch.h11 + ch.h22.transpose() * f2 * ch.h21;
    throw std::invalid_argument("destination must be 1 or 2");
}

Matrix equivalent_channel(const ChannelRealization& ch, const BeamformerState& s, int destination) {
    return bare_equivalent_channel(ch, s, destination) * (destination == 1 ? s.v2 : s.v1);
}

Matrix noise_covariance(const ChannelRealization& ch, const BeamformerState& s, int destination,
                        double sigma2) {
    Matrix f1 = s.f1.composed();
    Matrix f2 = s.f2.composed();
    const int m = ch.h11.cols();
    Matrix c(m, m);
    if (destination == 1) {
        Matrix a = ch.h11.transpose() * f1;
        Matrix b = ch.h21.transpose() * f2;
        c = a * a.adjoint() + b * b.adjoint() + Matrix::identity(m);
    } else if (destination == 2) {
        Matrix a = ch.h12.transpose() * f1;
        Matrix b = ch.h22.transpose() * f2;
        c = a * a.adjoint() + b * b.adjoint() + Matrix::identity(m);
    } else {
        throw std::invalid_argument("destination must be 1 or 2");
    }
    return sigma2 * c;
}

Matrix triangular_equivalent_channel(const BeamformerState& s) {
    return s.factors.ql1.l.transpose() * s.f1.f_center * s.factors.qr1.r +
           s.factors.ql2.l.transpose() * s.f2.f_center * s.factors.qr2.r;
}

Matrix triangular_noise_covariance(const BeamformerState& s, double sigma2) {
    Matrix a = s.factors.ql1.l.transpose() * s.f1.f_center;
    Matrix b = s.factors.ql2.l.transpose() * s.f2.f_center;
    Matrix vt = s.v1.transpose();
    return sigma2 * (a * a.adjoint() + b * b.adjoint() + vt * vt.adjoint());
}

Matrix relay_input_covariance(const ChannelRealization& ch, const Matrix& v1, const Matrix& v2,
                              double sigma2, int which) {
    const Matrix& ha = which == 1 ? ch.h11 : ch.h21;
    const Matrix& hb = which == 1 ? ch.h12 : ch.h22;
    Matrix a = ha * v1;
    Matrix b = hb * v2;
    Matrix eye = Matrix::identity(ha.rows());
    return a * a.adjoint() + b * b.adjoint() + sigma2 * eye;
}

Matrix relay_power_weight(const ChannelRealization& ch, const Matrix& v1, const Matrix& v2,
                          double sigma2, double rho_r, int which) {
    return (rho_r * rho_r) * relay_input_covariance(ch, v1, v2, sigma2, which);
}

double relay_power_used(const ChannelRealization& ch, const BeamformerState& s, double sigma2) {
    Matrix d1 = relay_power_weight(ch, s.v1, s.v2, sigma2, s.rho_r, 1);
    Matrix d2 = relay_power_weight(ch, s.v1, s.v2, sigma2, s.rho_r, 2);
    Matrix f1 = s.f1.composed();
    Matrix f2 = s.f2.composed();
    return (f1 * d1 * f1.adjoint() + f2 * d2 * f2.adjoint()).trace().real();
}

std::pair<Matrix, Matrix> simulate_transmission(const ChannelRealization& ch,
                                                const BeamformerState& s, const Matrix& x1,
                                                const Matrix& x2, const NoiseDraws& noise) {
    const int m = ch.h11.cols();
    if (x1.rows() != m || x2.rows() != m || x1.cols() != 1 || x2.cols() != 1)
        throw std::invalid_argument("symbol vectors must be M x 1");
    Matrix t1 = s.v1 * x1;
    Matrix t2 = s.v2 * x2;
    Matrix f1 = s.f1.composed();
    Matrix f2 = s.f2.composed();

    // First slot: both sources transmit, relays receive.
    Matrix y_r1 = ch.h11 * t1 + ch.h12 * t2 + noise.n_r1;
    Matrix y_r2 = ch.h21 * t1 + ch.h22 * t2 + noise.n_r2;
    // Second slot: relays amplify and broadcast.
    Matrix x_r1 = f1 * y_r1;
    Matrix x_r2 = f2 * y_r2;
    Matrix y1 = ch.h11.transpose() * x_r1 + ch.h21.transpose() * x_r2 + noise.n1;
    Matrix y2 = ch.h12.transpose() * x_r1 + ch.h22.transpose() * x_r2 + noise.n2;
    // Each source knows its own transmit vector and the CSI, so the echo
    // is subtracted exactly.
    Matrix si1 = (ch.h11.transpose() * f1 * ch.h11 + ch.h21.transpose() * f2 * ch.h21) * t1;
    Matrix si2 = (ch.h12.transpose() * f1 * ch.h12 + ch.h22.transpose() * f2 * ch.h22) * t2;
    return {y1 - si1, y2 - si2};
}

Matrix center_power_weight(const ChannelRealization& ch, const BeamformerState& s, double sigma2,
                           int which) {
    Matrix d = relay_power_weight(ch, s.v1, s.v2, sigma2, s.rho_r, which);
    const Matrix& qr = which == 1 ? s.factors.qr1.q : s.factors.qr2.q;
    return qr.adjoint() * d * qr;
}

AssembledFilters assemble_qlqr_filters(const ChannelRealization& ch, const Matrix& v1,
                                         const Matrix& v2, const SystemConfig& config) {
    const int n = config.n, m = config.m;
    AssembledFilters out;
    out.factors.ql1 = ql_decompose(ch.h11 * v1);
    out.factors.ql2 = ql_decompose(ch.h21 * v1);
    out.factors.qr1 = qr_decompose(ch.h12 * v2);
    out.factors.qr2 = qr_decompose(ch.h22 * v2);

    const double rank_tol = 1e-12;
    for (double d : out.factors.ql1.block_diag())
        if (std::abs(d) < rank_tol) throw DegenerateChannel("H11*V1 rank deficient");
    for (double d : out.factors.ql2.block_diag())
        if (std::abs(d) < rank_tol) throw DegenerateChannel("H21*V1 rank deficient");
    for (double d : out.factors.qr1.diag_real())
        if (std::abs(d) < rank_tol) throw DegenerateChannel("H12*V2 rank deficient");
    for (double d : out.factors.qr2.diag_real())
        if (std::abs(d) < rank_tol) throw DegenerateChannel("H22*V2 rank deficient");

    out.f1.f_left = out.factors.ql1.q.conjugate();
    out.f2.f_left = out.factors.ql2.q.conjugate();
    out.f1.f_right = out.factors.qr1.q.adjoint();
    out.f2.f_right = out.factors.qr2.q.adjoint();
    out.f1.f_center = Matrix(n, m);
    out.f2.f_center = Matrix(n, m);

    // Equal center gains per relay, scaled so the relay budget is met with
    // equality under the split a (a2 = 1 - a).
    double rho = power_normalizer(config.p1, config.p2);
    for (int which = 1; which <= 2; ++which) {
        RelayFilter& f = which == 1 ? out.f1 : out.f2;
        const Matrix& q = which == 1 ? out.factors.qr1.q : out.factors.qr2.q;
        Matrix d = relay_power_weight(ch, v1, v2, config.sigma2, rho, which);
        Matrix dt = q.adjoint() * d * q;
        double wsum = 0.0;
        for (int k = 0; k < m; ++k) wsum += dt(k, k).real();
        double budget = (which == 1 ? config.a : 1.0 - config.a) * config.pr;
        double g = wsum > 0.0 ? std::sqrt(budget / wsum) : 0.0;
        f.set_gains(std::vector<double>(static_cast<size_t>(m), g));
    }
    return out;
}

}  // namespace twrb
