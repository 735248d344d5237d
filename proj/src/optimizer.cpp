#include "twrb/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace twrb {

namespace {

Matrix hermitize(const Matrix& a) {
    Matrix h = a;
    for (int i = 0; i < h.rows(); ++i) {
        h(i, i) = cplx(h(i, i).real(), 0.0);
        for (int j = i + 1; j < h.cols(); ++j) {
            cplx avg = 0.5 * (h(i, j) + std::conj(h(j, i)));
            h(i, j) = avg;
            h(j, i) = std::conj(avg);
        }
    }
    return h;
}

// Noise-amplification matrices Psi_i = sum_r H_ri^H F_r^H F_r H_ri.
Matrix psi_matrix(const ChannelRealization& ch, const Matrix& f1, const Matrix& f2, int source) {
    const Matrix& ha = source == 1 ? ch.h11 : ch.h12;
    const Matrix& hb = source == 1 ? ch.h21 : ch.h22;
    Matrix a = f1 * ha;
    Matrix b = f2 * hb;
    return a.adjoint() * a + b.adjoint() * b;
}

// Wiener-optimal MSE through the inversion lemma.
Matrix mse_opt(const Matrix& h_eq, const Matrix& c_noise) {
    Matrix phi = h_eq.adjoint() * inverse(c_noise) * h_eq;
    return inverse(Matrix::identity(h_eq.cols()) + hermitize(phi));
}

double real_trace(const Matrix& a) { return a.trace().real(); }

// Eigenvalue clip of a Hermitian matrix to the PSD cone.
Matrix clip_psd(const Matrix& a) {
    HermitianEigen e = hermitian_eig(hermitize(a));
    std::vector<double> w(e.values.size());
    for (size_t i = 0; i < w.size(); ++i) w[i] = std::max(0.0, e.values[i]);
    return e.vectors * Matrix::diagonal(w) * e.vectors.adjoint();
}

Matrix inv_sqrt_hpd(const Matrix& a) {
    HermitianEigen e = hermitian_eig(hermitize(a));
    std::vector<double> w(e.values.size());
    for (size_t i = 0; i < w.size(); ++i) {
        if (e.values[i] <= 0.0) throw NotPositiveDefinite("inv_sqrt of non-PD matrix");
        w[i] = 1.0 / std::sqrt(e.values[i]);
    }
    return e.vectors * Matrix::diagonal(w) * e.vectors.adjoint();
}

}  // namespace

Matrix wiener_receiver(const Matrix& h_eq, const Matrix& c_noise) {
    return inverse(h_eq * h_eq.adjoint() + c_noise) * h_eq;
}

Matrix mse_matrix(const Matrix& w, const Matrix& h_eq, const Matrix& c_noise) {
    Matrix e = w.adjoint() * h_eq - Matrix::identity(h_eq.cols());
    return e * e.adjoint() + w.adjoint() * c_noise * w;
}

MseReport link_mse(const ChannelRealization& ch, const BeamformerState& s, double sigma2) {
    MseReport r;
    r.mse1 = mse_opt(equivalent_channel(ch, s, 1), noise_covariance(ch, s, 1, sigma2));
    r.mse2 = mse_opt(equivalent_channel(ch, s, 2), noise_covariance(ch, s, 2, sigma2));
    r.tr1 = real_trace(r.mse1);
    r.tr2 = real_trace(r.mse2);
    r.sum = r.tr1 + r.tr2;
    return r;
}

// ---------------------------------------------------------------------------
// Source precoder update
// ---------------------------------------------------------------------------

PrecoderUpdate update_source_precoder(const ChannelRealization& ch, const BeamformerState& s,
                                      int which, const SystemConfig& cfg) {
    if (which != 1 && which != 2) throw std::invalid_argument("which must be 1 or 2");
    const int m = cfg.m;
    const double rho2 = s.rho_r * s.rho_r;
    const Matrix f1 = s.f1.composed();
    const Matrix f2 = s.f2.composed();

    // which == 2 serves link 1 (x2 decoded at S1) and vice versa.
    const int dest = which == 2 ? 1 : 2;
    Matrix h_bar = bare_equivalent_channel(ch, s, dest);
    Matrix c = noise_covariance(ch, s, dest, cfg.sigma2);
    Matrix phi = hermitize(h_bar.adjoint() * inverse(c) * h_bar);

    Matrix psi_own = psi_matrix(ch, f1, f2, which);
    Matrix psi_other = psi_matrix(ch, f1, f2, which == 1 ? 2 : 1);
    const Matrix& v_other = which == 1 ? s.v2 : s.v1;
    const double p_own = which == 1 ? cfg.p1 : cfg.p2;

    double noise_amp = (f1 * f1.adjoint() + f2 * f2.adjoint()).trace().real() * cfg.sigma2;
    double relay_budget = cfg.pr - rho2 * real_trace(v_other.adjoint() * psi_other * v_other) -
                          rho2 * noise_amp;
    relay_budget = std::max(relay_budget, 0.0);

    PrecoderUpdate out;
    auto fallback = [&]() {
        Matrix v = Matrix::identity(m) * std::sqrt(p_own / m);
        double usage = rho2 * real_trace(v.adjoint() * psi_own * v);
        if (usage > relay_budget && usage > 0.0) v *= std::sqrt(relay_budget / usage);
        out.v = v;
        out.fallback = true;
        return out;
    };

    Matrix omega, omega_inv, phi_inv;
    try {
        omega = cholesky(phi).xi;  // phi = omega^H omega
        omega_inv = inverse(omega);
        phi_inv = omega_inv * omega_inv.adjoint();
    } catch (const NotPositiveDefinite&) {
        throw DegenerateChannel("phi not positive definite in precoder update");
    }

    // Gram matrix of the precoder for multipliers (mu2 on own power, mu3 on
    // the relay budget), eigenvalues water-filled at zero.
    auto gram = [&](double mu2, double mu3) -> Matrix {
        Matrix t = hermitize(Matrix::identity(m) * mu2 + (mu3 * rho2) * psi_own);
        Matrix sform = hermitize(omega_inv.adjoint() * t * omega_inv);
        Matrix k = omega_inv * inv_sqrt_hpd(sform) * omega_inv.adjoint() - phi_inv;
        return clip_psd(k);
    };
    auto own_power = [&](const Matrix& k) { return real_trace(k); };
    auto relay_usage = [&](const Matrix& k) { return rho2 * real_trace(psi_own * k); };

    // The triangular factorization downstream assumes a nonsingular
    // precoder; water-filling can zero out weak eigenmodes, so a tiny
    // trace-preserving ridge keeps the Gram matrix full rank.
    auto full_rank_floor = [&](Matrix k) {
        double tr = real_trace(k);
        if (tr <= 0.0) return k;
        double ridge = 1e-6 * tr / m;
        k += Matrix::identity(m) * ridge;
        k *= cplx(tr / real_trace(k), 0.0);
        return k;
    };

    const double p_tol = 1e-8 * std::max(1.0, p_own);
    const double r_tol = 1e-8 * std::max(1.0, relay_budget);

    // Inner bisection on mu2 for a fixed mu3: either mu2 = 0 already meets
    // the power cap or the cap is made active.
    auto solve_mu2 = [&](double mu3, double& mu2_out, Matrix& k_out) -> bool {
        if (mu3 > 0.0) {
            try {
                Matrix k0 = gram(0.0, mu3);
                if (own_power(k0) <= p_own) {
                    mu2_out = 0.0;
                    k_out = k0;
                    return true;
                }
            } catch (const NotPositiveDefinite&) {
                // psi_own singular: mu2 must stay positive
            }
        }
        double hi = 1.0;
        int guard = 0;
        while (own_power(gram(hi, mu3)) > p_own && ++guard < 80) hi *= 2.0;
        if (guard >= 80) return false;
        double lo = 0.0;
        Matrix k = gram(hi, mu3);
        for (int it = 0; it < 200; ++it) {
            double mid = 0.5 * (lo + hi);
            if (mid <= 0.0) mid = std::numeric_limits<double>::min();
            Matrix km;
            try {
                km = gram(mid, mu3);
            } catch (const NotPositiveDefinite&) {
                lo = mid;
                continue;
            }
            double tau = own_power(km);
            if (tau > p_own) {
                lo = mid;
            } else {
                hi = mid;
                k = km;
                if (p_own - tau <= p_tol) break;
            }
        }
        mu2_out = hi;
        k_out = k;
        return true;
    };

    // Branch A: relay constraint slack at mu3 = 0.
    double mu2 = 0.0;
    Matrix k;
    if (!solve_mu2(0.0, mu2, k)) return fallback();
    if (relay_usage(k) <= relay_budget) {
        out.v = hermitian_sqrt(full_rank_floor(k));
        out.mu_source = mu2;
        return out;
    }

    // Branch B: relay constraint active; outer bisection on mu3.
    double lo3 = 0.0, hi3 = 1.0;
    double mu2_hi = 0.0;
    Matrix k_hi;
    int guard = 0;
    while (true) {
        if (!solve_mu2(hi3, mu2_hi, k_hi)) return fallback();
        if (relay_usage(k_hi) <= relay_budget) break;
        hi3 *= 2.0;
        if (++guard >= 80) return fallback();
    }
    double mu3 = hi3;
    mu2 = mu2_hi;
    k = k_hi;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo3 + hi3);
        double mu2_mid = 0.0;
        Matrix k_mid;
        if (!solve_mu2(mid, mu2_mid, k_mid)) return fallback();
        double usage = relay_usage(k_mid);
        if (usage > relay_budget) {
            lo3 = mid;
        } else {
            hi3 = mid;
            mu3 = mid;
            mu2 = mu2_mid;
            k = k_mid;
            if (relay_budget - usage <= r_tol) break;
        }
    }
    out.v = hermitian_sqrt(full_rank_floor(k));
    out.mu_source = mu2;
    out.mu_relay = mu3;
    return out;
}

// ---------------------------------------------------------------------------
// Det-max center gains
// ---------------------------------------------------------------------------

namespace {

struct DetMaxWork {
    std::vector<double> a, b;    // objective weights l*r per relay
    std::vector<double> d1, d2;  // quadratic constraint weights
    double pr = 1.0;
    bool per_relay = false;
    double split_a = 0.5;
    int m = 1;

    double objective(const std::vector<double>& f1, const std::vector<double>& f2) const {
        double g = 0.0;
        for (int k = 0; k < m; ++k) {
            double s = a[static_cast<size_t>(k)] * f1[static_cast<size_t>(k)] +
                       b[static_cast<size_t>(k)] * f2[static_cast<size_t>(k)];
            g += std::log(std::max(s, 1e-300));
        }
        return g;
    }
};

// Euclidean projection onto {x >= 0, sum_k d_k x_k^2 <= budget}.
void project_ellipsoid(std::vector<double>& x, const std::vector<double>& d, double budget) {
    double q = 0.0;
    for (size_t k = 0; k < x.size(); ++k) {
        x[k] = std::max(0.0, x[k]);
        q += d[k] * x[k] * x[k];
    }
    if (q <= budget || q == 0.0) return;
    auto usage = [&](double lam) {
        double s = 0.0;
        for (size_t k = 0; k < x.size(); ++k) {
            double xk = x[k] / (1.0 + 2.0 * lam * d[k]);
            s += d[k] * xk * xk;
        }
        return s;
    };
    double lo = 0.0, hi = 1.0;
    int guard = 0;
    while (usage(hi) > budget && ++guard < 200) hi *= 2.0;
    for (int it = 0; it < 100; ++it) {
        double mid = 0.5 * (lo + hi);
        if (usage(mid) > budget)
            lo = mid;
        else
            hi = mid;
    }
    for (size_t k = 0; k < x.size(); ++k) x[k] /= 1.0 + 2.0 * hi * d[k];
}

void project_feasible(const DetMaxWork& w, std::vector<double>& f1, std::vector<double>& f2) {
    if (w.per_relay) {
        project_ellipsoid(f1, w.d1, w.split_a * w.pr);
        project_ellipsoid(f2, w.d2, (1.0 - w.split_a) * w.pr);
        return;
    }
    // Joint constraint: treat (f1, f2) as one vector.
    std::vector<double> x(f1);
    x.insert(x.end(), f2.begin(), f2.end());
    std::vector<double> d(w.d1);
    d.insert(d.end(), w.d2.begin(), w.d2.end());
    project_ellipsoid(x, d, w.pr);
    std::copy(x.begin(), x.begin() + w.m, f1.begin());
    std::copy(x.begin() + w.m, x.end(), f2.begin());
}

// Projected gradient ascent on the concave log objective; step halving on
// failure to improve, at most 50 halvings per step.
void maximize_inner(const DetMaxWork& w, std::vector<double>& f1, std::vector<double>& f2) {
    project_feasible(w, f1, f2);
    double g = w.objective(f1, f2);
    double step = 1.0;
    for (int it = 0; it < 500; ++it) {
        std::vector<double> g1(static_cast<size_t>(w.m)), g2(static_cast<size_t>(w.m));
        for (int k = 0; k < w.m; ++k) {
            double s = w.a[static_cast<size_t>(k)] * f1[static_cast<size_t>(k)] +
                       w.b[static_cast<size_t>(k)] * f2[static_cast<size_t>(k)];
            s = std::max(s, 1e-300);
            g1[static_cast<size_t>(k)] = w.a[static_cast<size_t>(k)] / s;
            g2[static_cast<size_t>(k)] = w.b[static_cast<size_t>(k)] / s;
        }
        bool improved = false;
        double eta = step;
        bool tiny_gain = false;
        for (int half = 0; half < 50; ++half) {
            std::vector<double> c1(f1), c2(f2);
            for (int k = 0; k < w.m; ++k) {
                c1[static_cast<size_t>(k)] += eta * g1[static_cast<size_t>(k)];
                c2[static_cast<size_t>(k)] += eta * g2[static_cast<size_t>(k)];
            }
            project_feasible(w, c1, c2);
            double gc = w.objective(c1, c2);
            if (gc > g) {
                tiny_gain = (gc - g) <= 1e-13 * std::max(1.0, std::abs(g));
                f1 = c1;
                f2 = c2;
                g = gc;
                step = eta * 2.0;
                improved = true;
                break;
            }
            eta *= 0.5;
        }
        if (!improved || tiny_gain) break;
    }
}

}  // namespace

DetMaxResult solve_detmax(const DetMaxProblem& p) {
    const int m = static_cast<int>(p.l_diag1.size());
    if (static_cast<int>(p.l_diag2.size()) != m || static_cast<int>(p.r_diag1.size()) != m ||
        static_cast<int>(p.r_diag2.size()) != m)
        throw std::invalid_argument("detmax diagonal length mismatch");
    if (!(p.pr > 0.0)) throw std::invalid_argument("detmax requires positive budget");

    DetMaxWork w;
    w.m = m;
    w.pr = p.pr;
    w.per_relay = p.per_relay;
    w.split_a = p.split_a;
    w.a.resize(static_cast<size_t>(m));
    w.b.resize(static_cast<size_t>(m));
    w.d1.resize(static_cast<size_t>(m));
    w.d2.resize(static_cast<size_t>(m));
    for (int k = 0; k < m; ++k) {
        w.a[static_cast<size_t>(k)] =
            p.l_diag1[static_cast<size_t>(k)] * p.r_diag1[static_cast<size_t>(k)];
        w.b[static_cast<size_t>(k)] =
            p.l_diag2[static_cast<size_t>(k)] * p.r_diag2[static_cast<size_t>(k)];
        w.d1[static_cast<size_t>(k)] = std::max(p.d1(k, k).real(), 1e-300);
        w.d2[static_cast<size_t>(k)] = std::max(p.d2(k, k).real(), 1e-300);
    }

    DetMaxResult res;
    if (!p.f1_init.empty() && !p.f2_init.empty()) {
        res.f1 = p.f1_init;
        res.f2 = p.f2_init;
    } else {
        double s1 = 0.0, s2 = 0.0;
        for (int k = 0; k < m; ++k) {
            s1 += w.d1[static_cast<size_t>(k)];
            s2 += w.d2[static_cast<size_t>(k)];
        }
        double b1 = w.per_relay ? w.split_a * w.pr : 0.5 * w.pr;
        double b2 = w.per_relay ? (1.0 - w.split_a) * w.pr : 0.5 * w.pr;
        res.f1.assign(static_cast<size_t>(m), std::sqrt(b1 / std::max(s1, 1e-300)));
        res.f2.assign(static_cast<size_t>(m), std::sqrt(b2 / std::max(s2, 1e-300)));
    }
    project_feasible(w, res.f1, res.f2);

    std::vector<double> xi =
        p.xi_diag.empty() ? std::vector<double>(static_cast<size_t>(m), 1.0) : p.xi_diag;

    auto log_objective = [&](const std::vector<double>& f1, const std::vector<double>& f2,
                             const std::vector<double>& xiv) {
        double j = w.objective(f1, f2);
        for (int k = 0; k < m; ++k) j += std::log(std::max(xiv[static_cast<size_t>(k)], 1e-300));
        return j;
    };
    auto rebuild_xi = [&](const std::vector<double>& f1, const std::vector<double>& f2,
                          std::vector<double>& xiv) {
        Matrix df1 = Matrix::diagonal(f1);
        Matrix df2 = Matrix::diagonal(f2);
        Matrix c = p.l1_block.transpose() * df1 * df1 * p.l1_block.conjugate() +
                   p.l2_block.transpose() * df2 * df2 * p.l2_block.conjugate() + p.local_noise;
        c = hermitize(p.sigma2 * c);
        Matrix xim = cholesky(c).xi;
        for (int k = 0; k < m; ++k) xiv[static_cast<size_t>(k)] = 1.0 / xim(k, k).real();
    };

    const bool fixed_point = p.sigma2 > 0.0 && p.l1_block.rows() == m && p.l2_block.rows() == m &&
                             p.local_noise.rows() == m;
    double j_prev = log_objective(res.f1, res.f2, xi);
    res.converged = false;
    const int rounds = fixed_point ? std::max(1, p.outer_rounds) : 1;
    for (int round = 0; round < rounds; ++round) {
        maximize_inner(w, res.f1, res.f2);
        res.outer_rounds_used = round + 1;
        if (!fixed_point) {
            res.converged = true;
            break;
        }
        rebuild_xi(res.f1, res.f2, xi);
        double j = log_objective(res.f1, res.f2, xi);
        res.log_objective = j;
        if (std::abs(j - j_prev) <= 1e-8) {
            res.converged = true;
            break;
        }
        j_prev = j;
    }
    res.log_objective = log_objective(res.f1, res.f2, xi);
    return res;
}

// ---------------------------------------------------------------------------
// MSE balancing
// ---------------------------------------------------------------------------

BeamformerState balance_mse(const ChannelRealization& ch, const BeamformerState& s,
                            const SystemConfig& cfg, double balance_tol) {
    MseReport r = link_mse(ch, s, cfg.sigma2);
    double worst = std::max(r.tr1, r.tr2);
    if (worst <= 0.0 || std::abs(r.tr1 - r.tr2) / worst <= balance_tol) return s;

    // Link 1 is served by V2 and vice versa; degrade the stronger link by
    // shrinking its serving precoder until the traces meet.
    const bool link1_stronger = r.tr1 < r.tr2;
    const int dest = link1_stronger ? 1 : 2;
    const double target = worst;
    Matrix h_bar = bare_equivalent_channel(ch, s, dest);
    Matrix c = noise_covariance(ch, s, dest, cfg.sigma2);
    const Matrix& v = link1_stronger ? s.v2 : s.v1;
    Matrix quad = v.adjoint() * h_bar.adjoint() * inverse(c) * h_bar * v;
    HermitianEigen e = hermitian_eig(hermitize(quad));

    auto trace_at = [&](double beta) {
        double t = 0.0;
        for (double wv : e.values) t += 1.0 / (1.0 + beta * beta * std::max(wv, 0.0));
        return t;
    };
    double lo = 0.0, hi = 1.0;  // trace_at(0) = M >= target >= trace_at(1)
    for (int it = 0; it < 100; ++it) {
        double mid = 0.5 * (lo + hi);
        if (trace_at(mid) > target)
            lo = mid;
        else
            hi = mid;
    }
    double beta = hi;

    BeamformerState out = s;
    if (link1_stronger) {
        out.v2 = s.v2 * beta;
        out.factors.qr1.r = out.factors.qr1.r * beta;
        out.factors.qr2.r = out.factors.qr2.r * beta;
    } else {
        out.v1 = s.v1 * beta;
        out.factors.ql1.l = out.factors.ql1.l * beta;
        out.factors.ql2.l = out.factors.ql2.l * beta;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Main loop
// ---------------------------------------------------------------------------

namespace {

// Feasibility projection of warm-started gains after a refactorization.
void rescale_gains_to_budget(const ChannelRealization& ch, BeamformerState& s,
                             const SystemConfig& cfg) {
    if (cfg.per_relay_power) {
        for (int which = 1; which <= 2; ++which) {
            RelayFilter& f = which == 1 ? s.f1 : s.f2;
            Matrix dt = center_power_weight(ch, s, cfg.sigma2, which);
            std::vector<double> g = f.gains();
            double usage = 0.0;
            for (int k = 0; k < cfg.m; ++k)
                usage += g[static_cast<size_t>(k)] * g[static_cast<size_t>(k)] * dt(k, k).real();
            double budget = (which == 1 ? cfg.a : 1.0 - cfg.a) * cfg.pr;
            if (usage > budget && usage > 0.0) {
                double sc = std::sqrt(budget / usage);
                for (double& x : g) x *= sc;
                f.set_gains(g);
            }
        }
        return;
    }
    double usage = relay_power_used(ch, s, cfg.sigma2);
    if (usage > cfg.pr && usage > 0.0) {
        double sc = std::sqrt(cfg.pr / usage);
        for (RelayFilter* f : {&s.f1, &s.f2}) {
            std::vector<double> g = f->gains();
            for (double& x : g) x *= sc;
            f->set_gains(g);
        }
    }
}

void refresh_receivers(const ChannelRealization& ch, BeamformerState& s, double sigma2) {
    s.w1 = wiener_receiver(equivalent_channel(ch, s, 1), noise_covariance(ch, s, 1, sigma2));
    s.w2 = wiener_receiver(equivalent_channel(ch, s, 2), noise_covariance(ch, s, 2, sigma2));
}

void check_dual_forms(const ChannelRealization& ch, const BeamformerState& s, double sigma2) {
    Matrix h_raw = equivalent_channel(ch, s, 1);
    Matrix c_raw = noise_covariance(ch, s, 1, sigma2);
    Matrix phi_raw = h_raw.adjoint() * inverse(c_raw) * h_raw;
    Matrix h_tri = triangular_equivalent_channel(s);
    Matrix c_tri = triangular_noise_covariance(s, sigma2);
    Matrix phi_tri = h_tri.adjoint() * inverse(c_tri) * h_tri;
    double scale = std::max(1.0, phi_raw.norm_fro());
    if (distance_fro(phi_raw, phi_tri) > 1e-8 * scale)
        throw std::runtime_error("triangular/raw channel forms diverged");
    cplx dense = determinant(h_tri);
    auto l1 = s.factors.ql1.block_diag();
    auto l2 = s.factors.ql2.block_diag();
    auto r1 = s.factors.qr1.diag_real();
    auto r2 = s.factors.qr2.diag_real();
    auto g1 = s.f1.gains();
    auto g2 = s.f2.gains();
    cplx prod = 1.0;
    for (size_t k = 0; k < l1.size(); ++k) prod *= l1[k] * g1[k] * r1[k] + l2[k] * g2[k] * r2[k];
    if (std::abs(dense - prod) > 1e-9 * std::max(1.0, std::abs(dense)))
        throw std::runtime_error("triangular determinant product diverged");
}

DetMaxProblem build_detmax_problem(const ChannelRealization& ch, const BeamformerState& s,
                                   const SystemConfig& cfg, int outer_rounds) {
    const int m = cfg.m, n = cfg.n;
    DetMaxProblem p;
    p.l_diag1 = s.factors.ql1.block_diag();
    p.l_diag2 = s.factors.ql2.block_diag();
    p.r_diag1 = s.factors.qr1.diag_real();
    p.r_diag2 = s.factors.qr2.diag_real();
    p.d1 = center_power_weight(ch, s, cfg.sigma2, 1);
    p.d2 = center_power_weight(ch, s, cfg.sigma2, 2);
    p.pr = cfg.pr;
    p.per_relay = cfg.per_relay_power;
    p.split_a = cfg.a;
    p.outer_rounds = outer_rounds;
    p.sigma2 = cfg.sigma2;
    p.l1_block = s.factors.ql1.l.block(n - m, 0, m, m);
    p.l2_block = s.factors.ql2.l.block(n - m, 0, m, m);
    Matrix vt = s.v1.transpose();
    p.local_noise = vt * vt.adjoint();
    p.f1_init = s.f1.gains();
    p.f2_init = s.f2.gains();

    Matrix c_tri = triangular_noise_covariance(s, cfg.sigma2);
    Matrix xim = cholesky(hermitize(c_tri)).xi;
    p.xi_diag.resize(static_cast<size_t>(m));
    for (int k = 0; k < m; ++k) p.xi_diag[static_cast<size_t>(k)] = 1.0 / xim(k, k).real();
    return p;
}

}  // namespace

QlQrOutcome run_qlqr(const ChannelRealization& ch, const SystemConfig& cfg,
                     const QlQrOptions& opt) {
    cfg.validate();
    const int m = cfg.m;

    QlQrOutcome out;
    BeamformerState s;
    s.rho_r = power_normalizer(cfg.p1, cfg.p2);
    s.v1 = Matrix::identity(m) * std::sqrt(cfg.p1 / m);
    s.v2 = Matrix::identity(m) * std::sqrt(cfg.p2 / m);
    AssembledFilters af = assemble_qlqr_filters(ch, s.v1, s.v2, cfg);
    s.f1 = af.f1;
    s.f2 = af.f2;
    s.factors = af.factors;
    // Balance to near-exact equality inside the loop so tr MSE1 equals the
    // balanced value and the history is monotone without slack.
    const double loop_balance_tol = std::min(opt.balance_tol, 1e-10);
    s = balance_mse(ch, s, cfg, loop_balance_tol);
    refresh_receivers(ch, s, cfg.sigma2);

    MseReport rep = link_mse(ch, s, cfg.sigma2);
    rep.iteration = 0;
    out.history.push_back(rep);
    double m_prev = rep.tr1;

    auto balanced_metric = [&](const BeamformerState& st) {
        return link_mse(ch, st, cfg.sigma2).tr1;  // tr1 = tr2 after balancing
    };

    // Precoder block: both updates in the given order, refactorization of
    // the QL/QR structure, warm-started gains projected back to the budget.
    auto v_block = [&](BeamformerState cand, int first_precoder, int* fallback_count) {
        refresh_receivers(ch, cand, cfg.sigma2);
        for (int which : {first_precoder, 3 - first_precoder}) {
            PrecoderUpdate u = update_source_precoder(ch, cand, which, cfg);
            (which == 1 ? cand.v1 : cand.v2) = u.v;
            if (u.fallback && fallback_count) ++*fallback_count;
        }
        AssembledFilters fac = assemble_qlqr_filters(ch, cand.v1, cand.v2, cfg);
        std::vector<double> warm1 = cand.f1.gains();
        std::vector<double> warm2 = cand.f2.gains();
        cand.f1 = fac.f1;
        cand.f2 = fac.f2;
        cand.factors = fac.factors;
        cand.f1.set_gains(warm1);
        cand.f2.set_gains(warm2);
        rescale_gains_to_budget(ch, cand, cfg);
        return cand;
    };

    // Center-gain block: det-max on the current factors, stepped back by
    // halves when the full move hurts the balanced objective, followed by a
    // scan of the relay power split along the budget boundary.
    auto f_block = [&](BeamformerState cand, int* detmax_count) {
        std::vector<double> warm1 = cand.f1.gains();
        std::vector<double> warm2 = cand.f2.gains();
        DetMaxProblem dp = build_detmax_problem(ch, cand, cfg, opt.detmax_outer_rounds);
        DetMaxResult dr = solve_detmax(dp);
        if (!dr.converged && detmax_count) ++*detmax_count;

        MseReport base = link_mse(ch, cand, cfg.sigma2);
        double best = std::max(base.tr1, base.tr2);
        BeamformerState best_state = cand;
        double theta = 1.0;
        for (int half = 0; half < 8; ++half) {
            BeamformerState trial = cand;
            std::vector<double> g1(warm1), g2(warm2);
            for (size_t k = 0; k < g1.size(); ++k) {
                g1[k] += theta * (dr.f1[k] - warm1[k]);
                g2[k] += theta * (dr.f2[k] - warm2[k]);
            }
            trial.f1.set_gains(g1);
            trial.f2.set_gains(g2);
            MseReport r = link_mse(ch, trial, cfg.sigma2);
            double v = std::max(r.tr1, r.tr2);
            if (v < best) {
                best = v;
                best_state = trial;
                break;
            }
            theta *= 0.5;
        }
        cand = best_state;

        // Relay power-split refinement along the shared budget boundary;
        // with per-relay budgets the split is fixed and there is nothing to
        // scan.
        if (!cfg.per_relay_power) {
            Matrix dt1 = center_power_weight(ch, cand, cfg.sigma2, 1);
            Matrix dt2 = center_power_weight(ch, cand, cfg.sigma2, 2);
            std::vector<double> g1 = cand.f1.gains();
            std::vector<double> g2 = cand.f2.gains();
            double q1 = 0.0, q2 = 0.0;
            for (int k = 0; k < cfg.m; ++k) {
                q1 += dt1(k, k).real() * g1[static_cast<size_t>(k)] * g1[static_cast<size_t>(k)];
                q2 += dt2(k, k).real() * g2[static_cast<size_t>(k)] * g2[static_cast<size_t>(k)];
            }
            if (q1 > 1e-12 * cfg.pr && q2 > 1e-12 * cfg.pr) {
                double metric_now = best;
                BeamformerState scan_best = cand;
                auto eval_split = [&](double phi) {
                    double u1 = std::cos(phi) * std::sqrt(cfg.pr / q1);
                    double u2 = std::sin(phi) * std::sqrt(cfg.pr / q2);
                    BeamformerState trial = cand;
                    std::vector<double> t1(g1), t2(g2);
                    for (double& x : t1) x *= u1;
                    for (double& x : t2) x *= u2;
                    trial.f1.set_gains(t1);
                    trial.f2.set_gains(t2);
                    MseReport r = link_mse(ch, trial, cfg.sigma2);
                    double v = std::max(r.tr1, r.tr2);
                    if (v < metric_now) {
                        metric_now = v;
                        scan_best = trial;
                    }
                    return std::pair<double, double>(v, r.tr1 - r.tr2);
                };
                // The minimum of the max of two crossing curves sits at a
                // kink; bisect every sign change of the difference as well
                // as refining the best smooth sample.
                const int coarse = 48;
                double best_phi = -1.0, best_val = metric_now;
                std::vector<double> diffs(coarse + 1, 0.0);
                for (int i = 1; i < coarse; ++i) {
                    double phi = 0.5 * M_PI * i / coarse;
                    auto [v, d] = eval_split(phi);
                    diffs[static_cast<size_t>(i)] = d;
                    if (v < best_val) {
                        best_val = v;
                        best_phi = phi;
                    }
                }
                for (int i = 1; i + 1 < coarse; ++i) {
                    if (diffs[static_cast<size_t>(i)] * diffs[static_cast<size_t>(i + 1)] < 0.0) {
                        double lo = 0.5 * M_PI * i / coarse;
                        double hi = 0.5 * M_PI * (i + 1) / coarse;
                        double dlo = diffs[static_cast<size_t>(i)];
                        for (int b = 0; b < 40; ++b) {
                            double mid = 0.5 * (lo + hi);
                            auto [v, d] = eval_split(mid);
                            (void)v;
                            if (d * dlo > 0.0)
                                lo = mid;
                            else
                                hi = mid;
                        }
                    }
                }
                if (best_phi > 0.0) {
                    double lo = best_phi - 0.5 * M_PI / coarse;
                    double hi = best_phi + 0.5 * M_PI / coarse;
                    for (int it2 = 0; it2 < 40; ++it2) {
                        double m1p = lo + (hi - lo) / 3.0;
                        double m2p = hi - (hi - lo) / 3.0;
                        if (eval_split(m1p).first <= eval_split(m2p).first)
                            hi = m2p;
                        else
                            lo = m1p;
                    }
                    eval_split(0.5 * (lo + hi));
                }
                cand = scan_best;
            }
        }
        return cand;
    };

    // Joint source-power scan: shrink the two precoders by grid factors,
    // refill the relay gains to the budget in their current direction, and
    // keep whatever helps the balanced objective. This supplies the
    // coordinated V/f move the per-coordinate steps cannot express.
    auto power_scan = [&](const BeamformerState& base, int level) {
        BeamformerState best_state = base;
        double best = balanced_metric(balance_mse(ch, base, cfg, loop_balance_tol));
        auto eval_point = [&](double b1, double b2) {
            BeamformerState trial = base;
            trial.v1 = base.v1 * b1;
            trial.v2 = base.v2 * b2;
            // the cached factors scale with the precoders they came from
            trial.factors.ql1.l = base.factors.ql1.l * b1;
            trial.factors.ql2.l = base.factors.ql2.l * b1;
            trial.factors.qr1.r = base.factors.qr1.r * b2;
            trial.factors.qr2.r = base.factors.qr2.r * b2;
            double value = 2.0 * cfg.m;
            if (cfg.per_relay_power) {
                rescale_gains_to_budget(ch, trial, cfg);
                MseReport r = link_mse(ch, trial, cfg.sigma2);
                value = std::max(r.tr1, r.tr2);
                if (value < best) {
                    best = value;
                    best_state = trial;
                }
                return value;
            }
            // Refill the budget jointly with a coarse scan of the relay
            // split so a power swap is judged together with the gain
            // rebalance it needs.
            Matrix dt1 = center_power_weight(ch, trial, cfg.sigma2, 1);
            Matrix dt2 = center_power_weight(ch, trial, cfg.sigma2, 2);
            std::vector<double> g1 = trial.f1.gains();
            std::vector<double> g2 = trial.f2.gains();
            double q1 = 0.0, q2 = 0.0;
            for (int k = 0; k < cfg.m; ++k) {
                q1 += dt1(k, k).real() * g1[static_cast<size_t>(k)] * g1[static_cast<size_t>(k)];
                q2 += dt2(k, k).real() * g2[static_cast<size_t>(k)] * g2[static_cast<size_t>(k)];
            }
            if (q1 <= 1e-12 * cfg.pr || q2 <= 1e-12 * cfg.pr) return value;
            auto eval_phi = [&](double phi) {
                double u1 = std::cos(phi) * std::sqrt(cfg.pr / q1);
                double u2 = std::sin(phi) * std::sqrt(cfg.pr / q2);
                BeamformerState t2s = trial;
                std::vector<double> t1(g1), t2(g2);
                for (double& x : t1) x *= u1;
                for (double& x : t2) x *= u2;
                t2s.f1.set_gains(t1);
                t2s.f2.set_gains(t2);
                MseReport r = link_mse(ch, t2s, cfg.sigma2);
                double v = std::max(r.tr1, r.tr2);
                value = std::min(value, v);
                if (v < best) {
                    best = v;
                    best_state = t2s;
                }
                return r.tr1 - r.tr2;
            };
            const int phi_pts = level > 0 ? 40 : 12;
            double prev_diff = 0.0;
            double prev_phi = 0.0;
            for (int p = 1; p < phi_pts; ++p) {
                double phi = 0.5 * M_PI * p / phi_pts;
                double d = eval_phi(phi);
                if (p > 1 && d * prev_diff < 0.0) {
                    double lo = prev_phi, hi = phi, dlo = prev_diff;
                    for (int b = 0; b < 16; ++b) {
                        double mid = 0.5 * (lo + hi);
                        double dm = eval_phi(mid);
                        if (dm * dlo > 0.0)
                            lo = mid;
                        else
                            hi = mid;
                    }
                }
                prev_diff = d;
                prev_phi = phi;
            }
            return value;
        };
        // Scale factors may grow up to each precoder's power cap; the relay
        // refill keeps the budget exact either way.
        double used1 = (base.v1 * base.v1.adjoint()).trace().real();
        double used2 = (base.v2 * base.v2.adjoint()).trace().real();
        double b1max = used1 > 0.0 ? std::sqrt(cfg.p1 / used1) : 1.0;
        double b2max = used2 > 0.0 ? std::sqrt(cfg.p2 / used2) : 1.0;
        const int grid = level > 0 ? 28 : 10;
        double cell1 = b1max / grid, cell2 = b2max / grid;
        double c1 = std::min(1.0, b1max), c2 = std::min(1.0, b2max);
        for (int i = 1; i <= grid; ++i)
            for (int j = 1; j <= grid; ++j) {
                double v = eval_point(i * cell1, j * cell2);
                if (v <= best) {
                    c1 = i * cell1;
                    c2 = j * cell2;
                }
            }
        // two rounds of local grid refinement around the best cell
        const int rounds = level > 0 ? 4 : 3;
        for (int round = 0; round < rounds; ++round) {
            double step1 = cell1 / 3.0, step2 = cell2 / 3.0;
            double b1 = c1, b2 = c2;
            for (int i = -2; i <= 2; ++i)
                for (int j = -2; j <= 2; ++j) {
                    double x1 = std::clamp(b1 + i * step1, 1e-6, b1max);
                    double x2 = std::clamp(b2 + j * step2, 1e-6, b2max);
                    double v = eval_point(x1, x2);
                    if (v <= best) {
                        c1 = x1;
                        c2 = x2;
                    }
                }
            cell1 = step1;
            cell2 = step2;
        }
        return best_state;
    };

    for (int it = 1; it <= opt.max_iters; ++it) {
        int fallbacks = 0, detmax_misses = 0;

        // Candidate compositions of one sweep: precoders first with either
        // update order, center gains alone, and the joint power scan; each
        // ends balanced. Keep the best.
        BeamformerState cand =
            balance_mse(ch, f_block(v_block(s, 2, &fallbacks), &detmax_misses), cfg, loop_balance_tol);
        double metric = balanced_metric(cand);
        BeamformerState alts[3] = {
            balance_mse(ch, f_block(v_block(s, 1, nullptr), nullptr), cfg, loop_balance_tol),
            balance_mse(ch, f_block(s, nullptr), cfg, loop_balance_tol),
            balance_mse(ch, f_block(power_scan(s, 0), nullptr), cfg, loop_balance_tol)};
        for (BeamformerState& alt : alts) {
            double m_alt = balanced_metric(alt);
            if (m_alt < metric) {
                metric = m_alt;
                cand = std::move(alt);
            }
        }
        out.fallback_flags += fallbacks;
        out.detmax_flags += detmax_misses;

        if (metric > m_prev) {
            // No regular composition improves the balanced objective; try
            // once more with a finer power scan before stopping.
            BeamformerState esc =
                balance_mse(ch, f_block(power_scan(s, 1), nullptr), cfg, loop_balance_tol);
            double m_esc = balanced_metric(esc);
            if (m_esc > m_prev) {
                out.converged = true;
                break;
            }
            metric = m_esc;
            cand = std::move(esc);
        }
        if (opt.debug_checks) check_dual_forms(ch, cand, cfg.sigma2);
        MseReport r = link_mse(ch, cand, cfg.sigma2);
        r.iteration = it;
        refresh_receivers(ch, cand, cfg.sigma2);
        s = cand;
        out.history.push_back(r);
        out.iterations = it;
        if (m_prev - r.tr1 <= opt.tol * std::max(m_prev, 1e-300)) {
            out.converged = true;
            m_prev = r.tr1;
            break;
        }
        m_prev = r.tr1;
    }
    out.state = s;
    return out;
}

TrialOutcome run_trial(const SystemConfig& cfg, int trial, const QlQrOptions& opt) {
    TrialOutcome t;
    for (int resample = 0; resample < 32; ++resample) {
        t.channels = generate_channels(cfg, trial, resample);
        t.resamples = resample;
        try {
            t.outcome = run_qlqr(t.channels, cfg, opt);
            return t;
        } catch (const DegenerateChannel&) {
            continue;  // redraw with the next sub-seed
        }
    }
    throw DegenerateChannel("trial kept degenerating after 32 resamples");
}

}  // namespace twrb
