#include "twrb/simulator.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

namespace twrb {

namespace {

double log2_det_hermitian(const Matrix& a) {
    cplx d = determinant(a);
    return std::log2(std::abs(d));
}

// log2 det(I + B B^H) with B = H^H Xi^-1 obtained through the Cholesky
// factor of the whitening covariance (forward substitution, no dense
// inverse).
double log2_det_capacity(const Matrix& h_eq, const Matrix& c_noise) {
    Matrix xi = cholesky(c_noise).xi;  // c = xi^H xi, xi lower
    Matrix b = h_eq.adjoint() * solve_lower_triangular(xi, Matrix::identity(xi.rows()));
    Matrix gram = Matrix::identity(b.rows()) + b * b.adjoint();
    return log2_det_hermitian(gram);
}

struct Welford {
    int n = 0;
    double mean = 0.0;
    double m2 = 0.0;
    void add(double x) {
        ++n;
        double d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
    }
    double std_err() const { return n > 1 ? std::sqrt(m2 / (n - 1) / n) : 0.0; }
};

// Precomputed effective-signal operators for one state; algebraically the
// same map as simulate_transmission, cheap enough for the symbol loop.
struct LinkSim {
    Matrix a1, a2;      // H11^T F1, H21^T F2  (to S1)
    Matrix b1, b2;      // H12^T F1, H22^T F2  (to S2)
    Matrix heq1, heq2;  // folded equivalent channels
    Matrix w1h, w2h;

    LinkSim(const ChannelRealization& ch, const BeamformerState& s) {
        Matrix f1 = s.f1.composed();
        Matrix f2 = s.f2.composed();
        a1 = ch.h11.transpose() * f1;
        a2 = ch.h21.transpose() * f2;
        b1 = ch.h12.transpose() * f1;
        b2 = ch.h22.transpose() * f2;
        heq1 = (a1 * ch.h12 + a2 * ch.h22) * s.v2;
        heq2 = (b1 * ch.h11 + b2 * ch.h21) * s.v1;
        w1h = s.w1.adjoint();
        w2h = s.w2.adjoint();
    }

    // Effective receive vectors after self-interference cancellation.
    Matrix receive1(const Matrix& x2, const NoiseDraws& nd) const {
        return heq1 * x2 + a1 * nd.n_r1 + a2 * nd.n_r2 + nd.n1;
    }
    Matrix receive2(const Matrix& x1, const NoiseDraws& nd) const {
        return heq2 * x1 + b1 * nd.n_r1 + b2 * nd.n_r2 + nd.n2;
    }
};

int count_qpsk_bit_errors(const Matrix& estimate, const std::vector<int>& bits) {
    int errors = 0;
    for (int k = 0; k < estimate.rows(); ++k) {
        cplx z = estimate(k, 0);
        int b0 = z.real() >= 0.0 ? 0 : 1;
        int b1 = z.imag() >= 0.0 ? 0 : 1;
        errors += (b0 != bits[static_cast<size_t>(2 * k)]) + (b1 != bits[static_cast<size_t>(2 * k + 1)]);
    }
    return errors;
}

}  // namespace

void ExperimentSpec::validate() const {
    config.validate();
    if (trials < 1) throw std::invalid_argument("trials must be >= 1");
    if (sweep_db.empty()) throw std::invalid_argument("sweep is empty");
    if (kind == ExperimentKind::BerVsSnr && symbols_per_trial < 1)
        throw std::invalid_argument("symbols_per_trial must be >= 1");
    if (relay_groups < 1) throw std::invalid_argument("relay_groups must be >= 1");
}

void parallel_for_trials(int n, int threads, const std::function<void(int)>& body) {
    int t = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
    t = std::max(1, std::min(t, n));
    if (t == 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(t));
    for (int w = 0; w < t; ++w)
        pool.emplace_back([&] {
            int i;
            while ((i = next.fetch_add(1)) < n) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

SmiSample smi_of_state(const ChannelRealization& ch, const BeamformerState& s, double sigma2) {
    SmiSample out;
    // Dense route through the receive filters actually in the state.
    Matrix h1 = equivalent_channel(ch, s, 1);
    Matrix c1 = noise_covariance(ch, s, 1, sigma2);
    Matrix h2 = equivalent_channel(ch, s, 2);
    Matrix c2 = noise_covariance(ch, s, 2, sigma2);
    Matrix mse1 = mse_matrix(s.w1, h1, c1);
    Matrix mse2 = mse_matrix(s.w2, h2, c2);
    double d1 = std::abs(determinant(mse1));
    double d2 = std::abs(determinant(mse2));
    if (d1 <= 0.0 || d2 <= 0.0 || !std::isfinite(d1) || !std::isfinite(d2))
        throw std::runtime_error("singular MSE matrix in SMI evaluation");
    out.bits_dense = std::log2(d1) + std::log2(d2);

    // Triangular route: |MSE| = det(I + B B^H)^-1 with B from the Cholesky
    // whitening, using the link-1 triangular forms from the QL/QR structure.
    double cap1 = log2_det_capacity(triangular_equivalent_channel(s),
                                    triangular_noise_covariance(s, sigma2));
    Matrix vt2 = s.v2.transpose();
    double cap2 = log2_det_capacity(vt2 * h2, vt2 * c2 * vt2.adjoint());
    out.bits_triangular = -cap1 - cap2;
    return out;
}

SvdEquivalenceReport svd_equivalence_check(const BeamformerState& s,
                                           const ChannelRealization& ch) {
    (void)ch;
    Matrix h1 = triangular_equivalent_channel(s);
    SvdEquivalenceReport rep;
    rep.triangular_product = 1.0;
    for (int k = 0; k < h1.rows(); ++k) rep.triangular_product *= std::norm(h1(k, k));
    SvdFactorization f = svd(h1);
    rep.svd_product = 1.0;
    for (double sv : f.sigma) rep.svd_product *= sv * sv;
    double geo = std::pow(rep.svd_product, 1.0 / (2.0 * static_cast<double>(f.sigma.size())));
    for (double sv : f.sigma) rep.normalized_spectrum.push_back(geo > 0.0 ? sv / geo : 0.0);
    return rep;
}

BeamformerState svd_baseline_state(const ChannelRealization& ch, const SystemConfig& cfg,
                                   const BeamformerState& reference) {
    const int n = cfg.n, m = cfg.m;
    BeamformerState s = reference;

    // Outer factors from the SVDs of the same precoded channels; thin left
    // factors parked in the last columns so the aligned center diagonal
    // picks them up exactly as it picks the QL bottom block.
    for (int which = 1; which <= 2; ++which) {
        const Matrix& hl = which == 1 ? ch.h11 : ch.h21;
        const Matrix& hr = which == 1 ? ch.h12 : ch.h22;
        RelayFilter& f = which == 1 ? s.f1 : s.f2;
        SvdFactorization left = svd(hl * reference.v1);
        SvdFactorization right = svd(hr * reference.v2);
        // complete U_left to a full unitary, thin part last, ascending sigma
        Matrix u_full(n, n);
        for (int j = 0; j < m; ++j)
            for (int i = 0; i < n; ++i) u_full(i, n - 1 - j) = left.u(i, j);
        for (int j = 0; j < n - m; ++j) {
            // Gram-Schmidt of the standard basis against the filled columns
            std::vector<cplx> col(static_cast<size_t>(n), cplx(0.0, 0.0));
            double best_norm = -1.0;
            std::vector<cplx> best(col);
            for (int cand = 0; cand < n; ++cand) {
                std::vector<cplx> c(static_cast<size_t>(n), cplx(0.0, 0.0));
                c[static_cast<size_t>(cand)] = 1.0;
                for (int kcol = 0; kcol < n; ++kcol) {
                    bool filled = kcol >= n - m || kcol < j;
                    if (!filled) continue;
                    cplx dot = 0.0;
                    for (int i = 0; i < n; ++i) dot += std::conj(u_full(i, kcol)) * c[static_cast<size_t>(i)];
                    for (int i = 0; i < n; ++i) c[static_cast<size_t>(i)] -= dot * u_full(i, kcol);
                }
                double nr = 0.0;
                for (const cplx& z : c) nr += std::norm(z);
                nr = std::sqrt(nr);
                if (nr > best_norm) {
                    best_norm = nr;
                    best = c;
                }
            }
            for (int i = 0; i < n; ++i) u_full(i, j) = best[static_cast<size_t>(i)] / best_norm;
        }
        f.f_left = u_full.conjugate();
        f.f_right = right.u.adjoint();
        f.f_center = Matrix(n, m);

        // Slot k couples sigma_left[m-1-k] (bottom-aligned) with
        // sigma_right[k]; store ascending left to mirror the construction.
        if (which == 1) {
            s.factors.ql1.q = u_full;
            s.factors.qr1.q = right.u;
        } else {
            s.factors.ql2.q = u_full;
            s.factors.qr2.q = right.u;
        }
    }

    // Diagonals for the det-max: singular values of the same products.
    SvdFactorization l1 = svd(ch.h11 * reference.v1);
    SvdFactorization l2 = svd(ch.h21 * reference.v1);
    SvdFactorization r1 = svd(ch.h12 * reference.v2);
    SvdFactorization r2 = svd(ch.h22 * reference.v2);
    DetMaxProblem p;
    p.l_diag1.assign(l1.sigma.rbegin(), l1.sigma.rend());
    p.l_diag2.assign(l2.sigma.rbegin(), l2.sigma.rend());
    p.r_diag1 = r1.sigma;
    p.r_diag2 = r2.sigma;
    p.d1 = center_power_weight(ch, s, cfg.sigma2, 1);
    p.d2 = center_power_weight(ch, s, cfg.sigma2, 2);
    p.pr = cfg.pr;
    p.per_relay = cfg.per_relay_power;
    p.split_a = cfg.a;
    p.sigma2 = cfg.sigma2;
    p.l1_block = Matrix::diagonal(p.l_diag1);
    p.l2_block = Matrix::diagonal(p.l_diag2);
    Matrix vt = s.v1.transpose();
    p.local_noise = vt * vt.adjoint();
    DetMaxResult dr = solve_detmax(p);

    // Match the per-relay gain products of the reference solution.
    std::vector<double> ref1 = reference.f1.gains();
    std::vector<double> ref2 = reference.f2.gains();
    for (int which = 1; which <= 2; ++which) {
        std::vector<double>& g = which == 1 ? dr.f1 : dr.f2;
        const std::vector<double>& ref = which == 1 ? ref1 : ref2;
        double prod_ref = 1.0, prod_got = 1.0;
        for (int k = 0; k < m; ++k) {
            prod_ref *= ref[static_cast<size_t>(k)];
            prod_got *= g[static_cast<size_t>(k)];
        }
        if (prod_got > 1e-30 && prod_ref > 1e-30) {
            double sc = std::pow(prod_ref / prod_got, 1.0 / m);
            for (double& x : g) x *= sc;
        }
        (which == 1 ? s.f1 : s.f2).set_gains(g);
    }
    s.w1 = wiener_receiver(equivalent_channel(ch, s, 1), noise_covariance(ch, s, 1, cfg.sigma2));
    s.w2 = wiener_receiver(equivalent_channel(ch, s, 2), noise_covariance(ch, s, 2, cfg.sigma2));
    return s;
}

ExperimentResult run_smi_experiment(const ExperimentSpec& spec) {
    spec.validate();
    if (spec.kind != ExperimentKind::SmiVsPr && spec.kind != ExperimentKind::SmiVsRelays)
        throw std::invalid_argument("run_smi_experiment requires an SMI spec");
    const int groups = spec.kind == ExperimentKind::SmiVsRelays ? spec.relay_groups : 1;

    ExperimentResult out;
    for (double db : spec.sweep_db) {
        SystemConfig cfg = spec.config;
        cfg.pr = std::pow(10.0, db / 10.0);

        std::vector<double> smi(static_cast<size_t>(spec.trials), 0.0);
        std::vector<double> iters(static_cast<size_t>(spec.trials), 0.0);
        std::vector<char> ok(static_cast<size_t>(spec.trials), 0);
        parallel_for_trials(spec.trials, spec.threads, [&](int t) {
            double bits = 0.0;
            double iter_count = 0.0;
            bool good = true;
            for (int g = 0; g < groups && good; ++g) {
                try {
                    TrialOutcome tr = run_trial(cfg, t * groups + g, spec.options);
                    if (!tr.outcome.converged) {
                        good = false;
                        break;
                    }
                    SmiSample s = smi_of_state(tr.channels, tr.outcome.state, cfg.sigma2);
                    if (std::abs(s.bits_dense - s.bits_triangular) > 1e-6)
                        throw std::runtime_error("SMI dual forms diverged");
                    bits += s.bits_dense;
                    iter_count += tr.outcome.iterations;
                } catch (const DegenerateChannel&) {
                    good = false;
                } catch (const std::runtime_error&) {
                    good = false;
                }
            }
            if (good) {
                smi[static_cast<size_t>(t)] = bits;
                iters[static_cast<size_t>(t)] = iter_count / groups;
                ok[static_cast<size_t>(t)] = 1;
            }
        });

        Welford acc, it_acc;
        for (int t = 0; t < spec.trials; ++t)
            if (ok[static_cast<size_t>(t)]) {
                acc.add(smi[static_cast<size_t>(t)]);
                it_acc.add(iters[static_cast<size_t>(t)]);
            }
        ExperimentRow row;
        row.point_db = db;
        row.metric = "smi";
        row.mean = acc.mean;
        row.std_err = acc.std_err();
        row.trials_converged = acc.n;
        row.trials_total = spec.trials;
        out.rows.push_back(row);
        ExperimentRow it_row = row;
        it_row.metric = "iterations";
        it_row.mean = it_acc.mean;
        it_row.std_err = it_acc.std_err();
        out.rows.push_back(it_row);
        if (acc.n < spec.trials - spec.trials / 100) out.flagged = true;
    }
    return out;
}

ExperimentResult run_ber_experiment(const ExperimentSpec& spec) {
    spec.validate();
    if (spec.kind != ExperimentKind::BerVsSnr)
        throw std::invalid_argument("run_ber_experiment requires a BER spec");
    const int m = spec.config.m;
    const int n = spec.config.n;
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);

    ExperimentResult out;
    for (double snr_db : spec.sweep_db) {
        SystemConfig cfg = spec.config;
        cfg.p1 = cfg.p2 = cfg.sigma2 * std::pow(10.0, snr_db / 10.0);

        std::vector<double> ber(static_cast<size_t>(spec.trials), 0.0);
        std::vector<double> ber_base(static_cast<size_t>(spec.trials), 0.0);
        std::vector<double> iters(static_cast<size_t>(spec.trials), 0.0);
        std::vector<char> ok(static_cast<size_t>(spec.trials), 0);

        parallel_for_trials(spec.trials, spec.threads, [&](int t) {
            TrialOutcome tr;
            BeamformerState base;
            try {
                tr = run_trial(cfg, t, spec.options);
                if (!tr.outcome.converged) return;
                base = svd_baseline_state(tr.channels, cfg, tr.outcome.state);
            } catch (const DegenerateChannel&) {
                return;
            } catch (const NotPositiveDefinite&) {
                return;
            }
            LinkSim proposed(tr.channels, tr.outcome.state);
            LinkSim svd_base(tr.channels, base);

            RandomStream sym(cfg.seed, static_cast<std::uint64_t>(t), RandomStream::kSymbols);
            RandomStream noise(cfg.seed, static_cast<std::uint64_t>(t), RandomStream::kNoise);
            const double nsd = std::sqrt(cfg.sigma2);

            long long errors = 0, errors_base = 0;
            std::vector<int> bits1(static_cast<size_t>(2 * m)), bits2(static_cast<size_t>(2 * m));
            Matrix x1(m, 1), x2(m, 1);
            NoiseDraws nd{Matrix(n, 1), Matrix(n, 1), Matrix(m, 1), Matrix(m, 1)};
            const std::uint64_t noise_per_symbol = static_cast<std::uint64_t>(2 * n + 2 * m);
            for (int sidx = 0; sidx < spec.symbols_per_trial; ++sidx) {
                std::uint64_t word1 = sym.bits(2 * static_cast<std::uint64_t>(sidx));
                std::uint64_t word2 = sym.bits(2 * static_cast<std::uint64_t>(sidx) + 1);
                for (int k = 0; k < m; ++k) {
                    bits1[static_cast<size_t>(2 * k)] = static_cast<int>((word1 >> (2 * k)) & 1u);
                    bits1[static_cast<size_t>(2 * k + 1)] = static_cast<int>((word1 >> (2 * k + 1)) & 1u);
                    bits2[static_cast<size_t>(2 * k)] = static_cast<int>((word2 >> (2 * k)) & 1u);
                    bits2[static_cast<size_t>(2 * k + 1)] = static_cast<int>((word2 >> (2 * k + 1)) & 1u);
                    x1(k, 0) = cplx((1 - 2 * bits1[static_cast<size_t>(2 * k)]) * inv_sqrt2,
                                    (1 - 2 * bits1[static_cast<size_t>(2 * k + 1)]) * inv_sqrt2);
                    x2(k, 0) = cplx((1 - 2 * bits2[static_cast<size_t>(2 * k)]) * inv_sqrt2,
                                    (1 - 2 * bits2[static_cast<size_t>(2 * k + 1)]) * inv_sqrt2);
                }
                std::uint64_t nb = static_cast<std::uint64_t>(sidx) * noise_per_symbol;
                for (int i = 0; i < n; ++i) {
                    nd.n_r1(i, 0) = nsd * noise.cgaussian(nb + static_cast<std::uint64_t>(i));
                    nd.n_r2(i, 0) = nsd * noise.cgaussian(nb + static_cast<std::uint64_t>(n + i));
                }
                for (int i = 0; i < m; ++i) {
                    nd.n1(i, 0) = nsd * noise.cgaussian(nb + static_cast<std::uint64_t>(2 * n + i));
                    nd.n2(i, 0) = nsd * noise.cgaussian(nb + static_cast<std::uint64_t>(2 * n + m + i));
                }
                errors += count_qpsk_bit_errors(proposed.w1h * proposed.receive1(x2, nd), bits2);
                errors += count_qpsk_bit_errors(proposed.w2h * proposed.receive2(x1, nd), bits1);
                errors_base += count_qpsk_bit_errors(svd_base.w1h * svd_base.receive1(x2, nd), bits2);
                errors_base += count_qpsk_bit_errors(svd_base.w2h * svd_base.receive2(x1, nd), bits1);
            }
            double denom = 4.0 * m * static_cast<double>(spec.symbols_per_trial);
            ber[static_cast<size_t>(t)] = errors / denom;
            ber_base[static_cast<size_t>(t)] = errors_base / denom;
            iters[static_cast<size_t>(t)] = tr.outcome.iterations;
            ok[static_cast<size_t>(t)] = 1;
        });

        Welford acc, acc_base, it_acc;
        for (int t = 0; t < spec.trials; ++t)
            if (ok[static_cast<size_t>(t)]) {
                acc.add(ber[static_cast<size_t>(t)]);
                acc_base.add(ber_base[static_cast<size_t>(t)]);
                it_acc.add(iters[static_cast<size_t>(t)]);
            }
        ExperimentRow row;
        row.point_db = snr_db;
        row.metric = "ber";
        row.mean = acc.mean;
        row.std_err = acc.std_err();
        row.trials_converged = acc.n;
        row.trials_total = spec.trials;
        out.rows.push_back(row);
        ExperimentRow brow = row;
        brow.metric = "ber_svd_baseline";
        brow.mean = acc_base.mean;
        brow.std_err = acc_base.std_err();
        out.rows.push_back(brow);
        ExperimentRow it_row = row;
        it_row.metric = "iterations";
        it_row.mean = it_acc.mean;
        it_row.std_err = it_acc.std_err();
        out.rows.push_back(it_row);
        if (acc.n < spec.trials - spec.trials / 100) out.flagged = true;
    }
    return out;
}

}  // namespace twrb
