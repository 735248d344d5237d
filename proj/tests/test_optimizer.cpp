#include <doctest.h>

#include <cmath>

#include "test_support.hpp"
#include "twrb/optimizer.hpp"

using namespace twrb;

TEST_SUITE_BEGIN("optimizer");

namespace {

BeamformerState make_state(const ChannelRealization& ch, const Matrix& v1, const Matrix& v2,
                           const SystemConfig& cfg) {
    BeamformerState s;
    s.v1 = v1;
    s.v2 = v2;
    s.rho_r = power_normalizer(cfg.p1, cfg.p2);
    AssembledFilters af = assemble_qlqr_filters(ch, v1, v2, cfg);
    s.f1 = af.f1;
    s.f2 = af.f2;
    s.factors = af.factors;
    s.w1 = Matrix::identity(cfg.m);
    s.w2 = Matrix::identity(cfg.m);
    return s;
}

double relay_budget_for(const ChannelRealization& ch, const BeamformerState& s,
                        const SystemConfig& cfg, int which) {
    Matrix f1 = s.f1.composed();
    Matrix f2 = s.f2.composed();
    const Matrix& ha = which == 2 ? ch.h11 : ch.h12;
    const Matrix& hb = which == 2 ? ch.h21 : ch.h22;
    Matrix a = f1 * ha;
    Matrix b = f2 * hb;
    Matrix psi_other = a.adjoint() * a + b.adjoint() * b;
    const Matrix& v_other = which == 2 ? s.v1 : s.v2;
    double rho2 = s.rho_r * s.rho_r;
    double amp = (f1 * f1.adjoint() + f2 * f2.adjoint()).trace().real() * cfg.sigma2;
    return cfg.pr - rho2 * (v_other.adjoint() * psi_other * v_other).trace().real() - rho2 * amp;
}

}  // namespace

TEST_CASE("wiener receiver closed form") {
    Matrix id = Matrix::identity(2);
    Matrix w = wiener_receiver(id, id);
    CHECK(distance_fro(w, id * 0.5) < 1e-12);

    Matrix zero(2, 2);
    CHECK(wiener_receiver(zero, id).norm_fro() < 1e-14);
}

TEST_CASE("wiener receiver stationarity and optimality") {
    Matrix h = test::random_matrix(3, 3, 11);
    Matrix c = test::random_hpd(3, 12);
    Matrix w = wiener_receiver(h, c);
    // gradient 2 H H^H W - 2 H + 2 C W vanishes
    Matrix grad = (h * h.adjoint() * w - h + c * w) * 2.0;
    CHECK(grad.norm_fro() < 1e-9);

    double base = mse_matrix(w, h, c).trace().real();
    for (int k = 0; k < 100; ++k) {
        Matrix delta = test::random_matrix(3, 3, 100u + static_cast<std::uint64_t>(k));
        delta *= cplx(1e-3 * w.norm_fro() / delta.norm_fro(), 0.0);
        double perturbed = mse_matrix(w + delta, h, c).trace().real();
        CHECK(perturbed >= base - 1e-12);
    }
}

TEST_CASE("mse matrix forms") {
    Matrix id = Matrix::identity(2);
    CHECK(distance_fro(mse_matrix(Matrix(2, 2), id, id), id) < 1e-14);

    Matrix half = id * 0.5;
    CHECK(distance_fro(mse_matrix(half, id, id), half) < 1e-14);
    CHECK(distance_fro(inverse(id + id), half) < 1e-14);

    // matrix-inversion-lemma equivalence at the Wiener point
    Matrix h = test::random_matrix(3, 3, 21);
    Matrix c = test::random_hpd(3, 22);
    Matrix w = wiener_receiver(h, c);
    Matrix direct = mse_matrix(w, h, c);
    Matrix lemma = inverse(Matrix::identity(3) + h.adjoint() * inverse(c) * h);
    CHECK(distance_fro(direct, lemma) < 1e-9);
}

TEST_CASE("precoder update under symmetric unit channels") {
    // Identity channels and filters make Phi and Psi multiples of I, so V
    // must come out as a real multiple of I with the source cap active
    // when the relay budget is generous.
    SystemConfig cfg;
    cfg.m = 2;
    cfg.n = 2;
    cfg.p1 = cfg.p2 = 4.0;
    cfg.pr = 1e5;
    ChannelRealization ch;
    ch.h11 = ch.h12 = ch.h21 = ch.h22 = Matrix::identity(2);
    BeamformerState s = make_state(ch, Matrix::identity(2), Matrix::identity(2), cfg);
    s.f1.set_gains({0.5, 0.5});  // keep relay amplification modest so the
    s.f2.set_gains({0.5, 0.5});  // source power cap is the active constraint
    PrecoderUpdate u = update_source_precoder(ch, s, 2, cfg);
    CHECK_FALSE(u.fallback);
    double tr = (u.v * u.v.adjoint()).trace().real();
    CHECK(tr == doctest::Approx(cfg.p2).epsilon(1e-6));
    CHECK(std::abs(u.v(0, 1)) < 1e-8);
    CHECK(std::abs(u.v(0, 0).imag()) < 1e-10);
    CHECK(u.v(0, 0).real() == doctest::Approx(u.v(1, 1).real()).epsilon(1e-8));

    // Against the scalar KKT solved by one-dimensional bisection: with
    // Phi = phi I and M identical streams, v^2 = max(0, 1/sqrt(mu phi) - 1/phi)
    // and mu is fixed by M v^2 = P2.
    Matrix h_bar = bare_equivalent_channel(ch, s, 1);
    Matrix c = noise_covariance(ch, s, 1, cfg.sigma2);
    double phi = (h_bar.adjoint() * inverse(c) * h_bar)(0, 0).real();
    double lo = 1e-12, hi = 1.0;
    auto power_at = [&](double mu) {
        return 2.0 * std::max(0.0, 1.0 / std::sqrt(mu * phi) - 1.0 / phi);
    };
    while (power_at(lo) < cfg.p2) lo *= 0.5;
    while (power_at(hi) > cfg.p2) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (power_at(mid) > cfg.p2)
            lo = mid;
        else
            hi = mid;
    }
    double v2_oracle = std::max(0.0, 1.0 / std::sqrt(hi * phi) - 1.0 / phi);
    CHECK(u.v(0, 0).real() * u.v(0, 0).real() == doctest::Approx(v2_oracle).epsilon(1e-5));
}

TEST_CASE("precoder update scalar case against grid search") {
    for (int seed = 0; seed < 10; ++seed) {
        SystemConfig cfg;
        cfg.m = 1;
        cfg.n = 1;
        cfg.p1 = 2.0;
        cfg.p2 = 3.0;
        cfg.pr = 5.0;
        cfg.seed = 900u + static_cast<std::uint64_t>(seed);
        ChannelRealization ch = generate_channels(cfg, 0);
        BeamformerState s = make_state(ch, Matrix{{std::sqrt(cfg.p1)}}, Matrix{{std::sqrt(cfg.p2)}}, cfg);
        PrecoderUpdate u = update_source_precoder(ch, s, 2, cfg);
        REQUIRE_FALSE(u.fallback);

        Matrix h_bar = bare_equivalent_channel(ch, s, 1);
        Matrix c = noise_covariance(ch, s, 1, cfg.sigma2);
        double phi = (h_bar.adjoint() * inverse(c) * h_bar)(0, 0).real();
        Matrix f1 = s.f1.composed();
        Matrix f2 = s.f2.composed();
        double psi = std::norm(f1(0, 0) * ch.h12(0, 0)) + std::norm(f2(0, 0) * ch.h22(0, 0));
        double budget = relay_budget_for(ch, s, cfg, 2);
        double rho2 = s.rho_r * s.rho_r;

        double best = 1e9, best_v = 0.0;
        const int grid = 10000;
        for (int g = 0; g <= grid; ++g) {
            double v = std::sqrt(cfg.p2) * g / grid;
            if (rho2 * psi * v * v > budget + 1e-12) break;
            double obj = 1.0 / (1.0 + v * v * phi);
            if (obj < best) {
                best = obj;
                best_v = v;
            }
        }
        double got = u.v(0, 0).real();
        CHECK(got == doctest::Approx(best_v).epsilon(2e-3));
        double got_obj = 1.0 / (1.0 + got * got * phi);
        CHECK(got_obj <= best + 1e-3);

        // feasibility and complementary slackness
        double own = got * got;
        double usage = rho2 * psi * own;
        CHECK(own <= cfg.p2 * (1.0 + 1e-6));
        CHECK(usage <= budget * (1.0 + 1e-6) + 1e-9);
        bool source_active = std::abs(own - cfg.p2) <= 1e-6 * cfg.p2;
        bool relay_active = std::abs(usage - budget) <= 1e-6 * std::max(1.0, budget);
        CHECK((source_active || relay_active));
    }
}

TEST_CASE("precoder update never raises its own objective") {
    SystemConfig cfg;
    cfg.m = 2;
    cfg.n = 3;
    cfg.p1 = 6.0;
    cfg.p2 = 8.0;
    cfg.pr = 12.0;
    cfg.seed = 321;
    ChannelRealization ch = generate_channels(cfg, 2);
    Matrix v1 = Matrix::identity(2) * std::sqrt(cfg.p1 / 2);
    Matrix v2 = Matrix::identity(2) * std::sqrt(cfg.p2 / 2);
    BeamformerState s = make_state(ch, v1, v2, cfg);

    Matrix h_bar = bare_equivalent_channel(ch, s, 1);
    Matrix c = noise_covariance(ch, s, 1, cfg.sigma2);
    Matrix phi = h_bar.adjoint() * inverse(c) * h_bar;
    auto objective = [&](const Matrix& v) {
        return inverse(Matrix::identity(2) + v.adjoint() * phi * v).trace().real();
    };
    PrecoderUpdate u = update_source_precoder(ch, s, 2, cfg);
    CHECK(objective(u.v) <= objective(s.v2) + 1e-9);

    // with filters fixed, growing budgets never worsen the objective and
    // drive it toward zero
    double prev = objective(u.v);
    double last = prev;
    for (double scale : {4.0, 16.0, 64.0, 256.0}) {
        SystemConfig big = cfg;
        big.p2 = cfg.p2 * scale;
        big.pr = cfg.pr * scale;
        PrecoderUpdate ub = update_source_precoder(ch, s, 2, big);
        double cur = objective(ub.v);
        CHECK(cur <= prev + 1e-9);
        prev = cur;
        last = cur;
    }
    CHECK(last < 0.2 * cfg.m);
}

TEST_CASE("detmax matches the closed form at M = 1") {
    for (int seed = 0; seed < 20; ++seed) {
        RandomStream rs(7000u + static_cast<std::uint64_t>(seed), 0, RandomStream::kGeneric);
        auto positive = [&](std::uint64_t i) { return 0.2 + rs.uniform01(i); };
        DetMaxProblem p;
        p.l_diag1 = {positive(0)};
        p.l_diag2 = {positive(1)};
        p.r_diag1 = {positive(2)};
        p.r_diag2 = {positive(3)};
        p.d1 = Matrix{{positive(4)}};
        p.d2 = Matrix{{positive(5)}};
        p.pr = 1.0 + positive(6);
        p.xi_diag = {1.0};
        DetMaxResult r = solve_detmax(p);

        double a = p.l_diag1[0] * p.r_diag1[0];
        double b = p.l_diag2[0] * p.r_diag2[0];
        double d1 = p.d1(0, 0).real(), d2 = p.d2(0, 0).real();
        double t = std::sqrt(p.pr / (a * a / d1 + b * b / d2));
        double f1 = a / d1 * t, f2 = b / d2 * t;
        CHECK(r.f1[0] == doctest::Approx(f1).epsilon(1e-6));
        CHECK(r.f2[0] == doctest::Approx(f2).epsilon(1e-6));
        CHECK(d1 * r.f1[0] * r.f1[0] + d2 * r.f2[0] * r.f2[0] <= p.pr * (1.0 + 1e-8));
    }
}

TEST_CASE("detmax symmetry") {
    DetMaxProblem p;
    p.l_diag1 = p.l_diag2 = {0.9, 1.3};
    p.r_diag1 = p.r_diag2 = {1.1, 0.7};
    p.d1 = p.d2 = Matrix::diagonal(std::vector<double>{0.8, 1.4});
    p.pr = 3.0;
    p.xi_diag = {1.0, 1.0};
    DetMaxResult r = solve_detmax(p);
    for (int k = 0; k < 2; ++k) CHECK(r.f1[static_cast<size_t>(k)] == doctest::Approx(r.f2[static_cast<size_t>(k)]).epsilon(1e-8));
}

TEST_CASE("detmax beats random feasible search at M = 2") {
    for (int seed = 0; seed < 5; ++seed) {
        RandomStream rs(7100u + static_cast<std::uint64_t>(seed), 0, RandomStream::kGeneric);
        auto positive = [&](std::uint64_t i) { return 0.2 + rs.uniform01(i); };
        DetMaxProblem p;
        p.l_diag1 = {positive(0), positive(1)};
        p.l_diag2 = {positive(2), positive(3)};
        p.r_diag1 = {positive(4), positive(5)};
        p.r_diag2 = {positive(6), positive(7)};
        p.d1 = Matrix::diagonal(std::vector<double>{positive(8), positive(9)});
        p.d2 = Matrix::diagonal(std::vector<double>{positive(10), positive(11)});
        p.pr = 2.5;
        p.xi_diag = {1.0, 1.0};
        DetMaxResult r = solve_detmax(p);

        auto value = [&](const std::vector<double>& f1, const std::vector<double>& f2) {
            double v = 1.0;
            for (int k = 0; k < 2; ++k)
                v *= p.l_diag1[static_cast<size_t>(k)] * f1[static_cast<size_t>(k)] *
                         p.r_diag1[static_cast<size_t>(k)] +
                     p.l_diag2[static_cast<size_t>(k)] * f2[static_cast<size_t>(k)] *
                         p.r_diag2[static_cast<size_t>(k)];
            return v;
        };
        double solver_value = value(r.f1, r.f2);
        double best_random = 0.0;
        for (int t = 0; t < 100000; ++t) {
            double x[4];
            double q = 0.0;
            for (int k = 0; k < 4; ++k) x[k] = rs.uniform01(100u + 4u * static_cast<std::uint64_t>(t) + static_cast<std::uint64_t>(k));
            q = p.d1(0, 0).real() * x[0] * x[0] + p.d1(1, 1).real() * x[1] * x[1] +
                p.d2(0, 0).real() * x[2] * x[2] + p.d2(1, 1).real() * x[3] * x[3];
            double sc = std::sqrt(p.pr / q);
            std::vector<double> f1 = {x[0] * sc, x[1] * sc};
            std::vector<double> f2 = {x[2] * sc, x[3] * sc};
            best_random = std::max(best_random, value(f1, f2));
        }
        CHECK(solver_value >= best_random * (1.0 - 1e-6));
    }
}

TEST_CASE("balance leaves an already balanced state alone") {
    SystemConfig cfg;
    cfg.m = 2;
    cfg.n = 2;
    cfg.seed = 51;
    // mirrored channels and equal powers make the links identical
    ChannelRealization ch = generate_channels(cfg, 1);
    ch.h12 = ch.h11;
    ch.h22 = ch.h21;
    Matrix v = Matrix::identity(2) * std::sqrt(cfg.p1 / 2);
    BeamformerState s = make_state(ch, v, v, cfg);
    MseReport before = link_mse(ch, s, cfg.sigma2);
    CHECK(before.tr1 == doctest::Approx(before.tr2).epsilon(1e-6));
    BeamformerState b = balance_mse(ch, s, cfg, 1e-3);
    CHECK(distance_fro(b.v1, s.v1) < 1e-9);
    CHECK(distance_fro(b.v2, s.v2) < 1e-9);
}

TEST_CASE("balance equalizes an asymmetric scalar instance") {
    SystemConfig cfg;
    cfg.m = 1;
    cfg.n = 1;
    cfg.p1 = 2.0;
    cfg.p2 = 8.0;
    cfg.seed = 53;
    ChannelRealization ch = generate_channels(cfg, 3);
    BeamformerState s = make_state(ch, Matrix{{std::sqrt(cfg.p1)}}, Matrix{{std::sqrt(cfg.p2)}}, cfg);
    MseReport before = link_mse(ch, s, cfg.sigma2);
    BeamformerState b = balance_mse(ch, s, cfg, 1e-3);
    MseReport after = link_mse(ch, b, cfg.sigma2);
    double gap = std::abs(after.tr1 - after.tr2) / std::max(after.tr1, after.tr2);
    CHECK(gap <= 1e-3);
    CHECK(std::max(after.tr1, after.tr2) ==
          doctest::Approx(std::max(before.tr1, before.tr2)).epsilon(1e-9));
    // powers never increase
    CHECK((b.v1 * b.v1.adjoint()).trace().real() <=
          (s.v1 * s.v1.adjoint()).trace().real() * (1.0 + 1e-12));
    CHECK((b.v2 * b.v2.adjoint()).trace().real() <=
          (s.v2 * s.v2.adjoint()).trace().real() * (1.0 + 1e-12));
}

TEST_CASE("qlqr loop on the all-ones scalar instance matches grid search") {
    SystemConfig cfg;
    cfg.m = 1;
    cfg.n = 1;
    cfg.p1 = cfg.p2 = cfg.pr = 10.0;
    cfg.sigma2 = 1.0;
    ChannelRealization ch;
    ch.h11 = ch.h12 = ch.h21 = ch.h22 = Matrix{{1.0}};
    QlQrOptions opt;
    opt.debug_checks = true;
    QlQrOutcome out = run_qlqr(ch, cfg, opt);
    CHECK(out.converged);

    // exhaustive symmetric grid over (v, f): v1 = v2 = v, f1 = f2 = f
    double rho2 = 1.0 / 20.0;
    double best = 1e9;
    const int grid = 1000;
    for (int i = 0; i <= grid; ++i) {
        double v = std::sqrt(10.0) * i / grid;
        double fmax = std::sqrt(10.0 / (2.0 * rho2 * (2.0 * v * v + 1.0)));
        for (int j = 0; j <= grid; ++j) {
            double f = fmax * j / grid;
            double mse = 1.0 / (1.0 + 4.0 * f * f * v * v / (2.0 * f * f + 1.0));
            best = std::min(best, mse);
        }
    }
    double got = out.history.back().tr1;
    CHECK(got == doctest::Approx(best).epsilon(1e-3));
}

TEST_CASE("qlqr trace history is non-increasing and feasible") {
    SystemConfig cfg;
    cfg.m = 2;
    cfg.n = 2;
    cfg.seed = 99;
    QlQrOptions opt;
    opt.debug_checks = true;
    for (int trial = 0; trial < 12; ++trial) {
        TrialOutcome t = run_trial(cfg, trial, opt);
        const auto& h = t.outcome.history;
        for (size_t i = 1; i < h.size(); ++i) CHECK(h[i].tr1 <= h[i - 1].tr1 + 1e-9);
        CHECK(t.outcome.converged);

        const BeamformerState& s = t.outcome.state;
        CHECK((s.v1 * s.v1.adjoint()).trace().real() <= cfg.p1 + 1e-9);
        CHECK((s.v2 * s.v2.adjoint()).trace().real() <= cfg.p2 + 1e-9);
        CHECK(relay_power_used(t.channels, s, cfg.sigma2) <= cfg.pr + 1e-6);
    }
}

TEST_CASE("converged receivers are perturbation-optimal") {
    SystemConfig cfg;
    cfg.m = 2;
    cfg.n = 2;
    cfg.seed = 202;
    for (int trial = 0; trial < 3; ++trial) {
        TrialOutcome t = run_trial(cfg, trial, {});
        REQUIRE(t.outcome.converged);
        const BeamformerState& s = t.outcome.state;
        for (int dest : {1, 2}) {
            Matrix h = equivalent_channel(t.channels, s, dest);
            Matrix c = noise_covariance(t.channels, s, dest, cfg.sigma2);
            const Matrix& w = dest == 1 ? s.w1 : s.w2;
            double base = mse_matrix(w, h, c).trace().real();
            for (int k = 0; k < 200; ++k) {
                Matrix delta = test::random_matrix(2, 2, 90000u + static_cast<std::uint64_t>(300 * trial + k));
                delta *= cplx(1e-3 * w.norm_fro() / delta.norm_fro(), 0.0);
                CHECK(mse_matrix(w + delta, h, c).trace().real() >= base - 1e-12);
            }
        }
    }
}

TEST_CASE("qlqr balances symmetric instances") {
    SystemConfig cfg;
    cfg.m = 2;
    cfg.n = 2;
    cfg.seed = 101;
    ChannelRealization ch = generate_channels(cfg, 0);
    ch.h12 = ch.h11;
    ch.h22 = ch.h21;
    QlQrOutcome out = run_qlqr(ch, cfg, {});
    CHECK(out.converged);
    const MseReport& last = out.history.back();
    CHECK(std::abs(last.tr1 - last.tr2) / std::max(last.tr1, last.tr2) <= 1e-3);
}

TEST_SUITE_END();
