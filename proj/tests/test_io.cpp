#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "twrb/experiment_io.hpp"

using namespace twrb;

TEST_SUITE_BEGIN("io");

TEST_CASE("manifest json round-trip is exact") {
    RunManifest m;
    m.command = "ber";
    m.config.m = 2;
    m.config.n = 3;
    m.config.p1 = 10.0;
    m.config.p2 = std::pow(10.0, 1.23);
    m.config.pr = 31.6227766016838;
    m.config.a = 0.25;
    m.config.sigma2 = 0.5;
    m.config.seed = 987654321;
    m.config.per_relay_power = true;
    m.p1_db = 10.0;
    m.p2_db = 12.3;
    m.pr_db = 15.0;
    m.sweep_db = {0.0, 2.5, 5.0};
    m.trials = 123;
    m.symbols = 456;
    m.relay_groups = 2;
    m.options.tol = 1e-7;
    m.options.max_iters = 64;
    m.options.balance_tol = 2e-3;
    m.options.debug_checks = true;
    m.threads = 3;
    m.out_dir = "/tmp/out";
    std::string js = manifest_to_json(m);
    RunManifest back = manifest_from_json(js);
    CHECK(back == m);
    // and stable across a second serialization
    CHECK(manifest_to_json(back) == js);
}

TEST_CASE("config file parsing with overrides and errors") {
    std::string path = "/tmp/twrb_test_config.txt";
    {
        std::ofstream f(path);
        f << "# experiment setup\n";
        f << "m 2\n";
        f << "n = 4\n";
        f << "p1_db 13\n";
        f << "points 0, 5, 10\n";
        f << "trials 77\n";
        f << "per_relay_power true\n";
    }
    RunManifest m;
    apply_config_file(path, m);
    CHECK(m.config.m == 2);
    CHECK(m.config.n == 4);
    CHECK(m.p1_db == 13.0);
    CHECK(m.config.p1 == doctest::Approx(std::pow(10.0, 1.3)).epsilon(1e-12));
    CHECK(m.sweep_db == std::vector<double>{0.0, 5.0, 10.0});
    CHECK(m.trials == 77);
    CHECK(m.config.per_relay_power);

    {
        std::ofstream f(path);
        f << "unknown_key 3\n";
    }
    CHECK_THROWS_AS(apply_config_file(path, m), std::invalid_argument);
    CHECK_THROWS_AS(apply_config_file("/nonexistent/config", m), std::invalid_argument);
    std::remove(path.c_str());
}

TEST_CASE("case spec parsing") {
    FlopConfig c = parse_case_spec("2,2,2x6");
    CHECK(c.k == 3);
    CHECK(c.n_i == 2);
    CHECK(c.n_t == 6);
    CHECK(c.n_r == 6);
    CHECK(c.is_golden_case());

    FlopConfig d = parse_case_spec("3,3x8");
    CHECK(d.k == 2);
    CHECK(d.n_i == 3);
    CHECK(d.n_t == 8);

    CHECK_THROWS_AS(parse_case_spec("2,3x6"), std::invalid_argument);
    CHECK_THROWS_AS(parse_case_spec("226"), std::invalid_argument);
    CHECK_THROWS_AS(parse_case_spec("x6"), std::invalid_argument);
}

TEST_CASE("experiment csv layout") {
    ExperimentResult res;
    res.rows.push_back({10.0, "smi", -3.25, 0.125, 199, 200});
    res.rows.push_back({10.0, "iterations", 6.5, 0.5, 199, 200});
    std::string csv = experiment_csv(res);
    CHECK(csv == "point_db,metric,mean,std_err,trials_converged,trials_total\n"
                 "10,smi,-3.25,0.125,199,200\n"
                 "10,iterations,6.5,0.5,199,200\n");
}

TEST_CASE("text file round trip") {
    std::string path = "/tmp/twrb_io_check.txt";
    write_text_file(path, "payload\n123\n");
    CHECK(read_text_file(path) == "payload\n123\n");
    std::remove(path.c_str());
    CHECK_THROWS_AS(read_text_file(path), std::runtime_error);
}

TEST_SUITE_END();
