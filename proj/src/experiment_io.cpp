#include "twrb/experiment_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace twrb {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr const char* kVersion = "twrb 1.0.0";

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

std::string fmt_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", x);
    return buf;
}

}  // namespace

bool RunManifest::operator==(const RunManifest& o) const {
    return command == o.command && config.m == o.config.m && config.n == o.config.n &&
           config.p1 == o.config.p1 && config.p2 == o.config.p2 && config.pr == o.config.pr &&
           config.a == o.config.a && config.sigma2 == o.config.sigma2 &&
           config.seed == o.config.seed && config.per_relay_power == o.config.per_relay_power &&
           p1_db == o.p1_db && p2_db == o.p2_db && pr_db == o.pr_db && sweep_db == o.sweep_db &&
           trials == o.trials && symbols == o.symbols && relay_groups == o.relay_groups &&
           options.tol == o.options.tol && options.max_iters == o.options.max_iters &&
           options.detmax_outer_rounds == o.options.detmax_outer_rounds &&
           options.balance_tol == o.options.balance_tol &&
           options.debug_checks == o.options.debug_checks && threads == o.threads &&
           out_dir == o.out_dir && case_spec == o.case_spec &&
           all_algorithms == o.all_algorithms && sweep_variable == o.sweep_variable &&
           sweep_lo == o.sweep_lo && sweep_hi == o.sweep_hi && sweep_fixed == o.sweep_fixed;
}

std::string manifest_to_json(const RunManifest& m) {
    ordered_json j;
    j["version"] = kVersion;
    j["command"] = m.command;
    j["config"] = {{"m", m.config.m},
                   {"n", m.config.n},
                   {"p1", m.config.p1},
                   {"p2", m.config.p2},
                   {"pr", m.config.pr},
                   {"a", m.config.a},
                   {"sigma2", m.config.sigma2},
                   {"seed", m.config.seed},
                   {"per_relay_power", m.config.per_relay_power}};
    j["config_db"] = {{"p1_db", m.p1_db}, {"p2_db", m.p2_db}, {"pr_db", m.pr_db}};
    j["sweep_db"] = m.sweep_db;
    j["trials"] = m.trials;
    j["symbols"] = m.symbols;
    j["relay_groups"] = m.relay_groups;
    j["options"] = {{"tol", m.options.tol},
                    {"max_iters", m.options.max_iters},
                    {"detmax_outer_rounds", m.options.detmax_outer_rounds},
                    {"balance_tol", m.options.balance_tol},
                    {"debug_checks", m.options.debug_checks}};
    j["threads"] = m.threads;
    j["out_dir"] = m.out_dir;
    j["case"] = m.case_spec;
    j["all_algorithms"] = m.all_algorithms;
    j["sweep"] = {{"variable", m.sweep_variable},
                  {"lo", m.sweep_lo},
                  {"hi", m.sweep_hi},
                  {"fixed", m.sweep_fixed}};
    j["snr_definition"] = "per-source transmit power over destination noise variance (P_i / sigma2)";
    return j.dump(2) + "\n";
}

RunManifest manifest_from_json(const std::string& text) {
    ordered_json j = ordered_json::parse(text);
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    const auto& c = j.at("config");
    m.config.m = c.at("m").get<int>();
    m.config.n = c.at("n").get<int>();
    m.config.p1 = c.at("p1").get<double>();
    m.config.p2 = c.at("p2").get<double>();
    m.config.pr = c.at("pr").get<double>();
    m.config.a = c.at("a").get<double>();
    m.config.sigma2 = c.at("sigma2").get<double>();
    m.config.seed = c.at("seed").get<std::uint64_t>();
    m.config.per_relay_power = c.at("per_relay_power").get<bool>();
    const auto& db = j.at("config_db");
    m.p1_db = db.at("p1_db").get<double>();
    m.p2_db = db.at("p2_db").get<double>();
    m.pr_db = db.at("pr_db").get<double>();
    m.sweep_db = j.at("sweep_db").get<std::vector<double>>();
    m.trials = j.at("trials").get<int>();
    m.symbols = j.at("symbols").get<int>();
    m.relay_groups = j.at("relay_groups").get<int>();
    const auto& o = j.at("options");
    m.options.tol = o.at("tol").get<double>();
    m.options.max_iters = o.at("max_iters").get<int>();
    m.options.detmax_outer_rounds = o.at("detmax_outer_rounds").get<int>();
    m.options.balance_tol = o.at("balance_tol").get<double>();
    m.options.debug_checks = o.at("debug_checks").get<bool>();
    m.threads = j.at("threads").get<int>();
    m.out_dir = j.at("out_dir").get<std::string>();
    m.case_spec = j.at("case").get<std::string>();
    m.all_algorithms = j.at("all_algorithms").get<bool>();
    const auto& s = j.at("sweep");
    m.sweep_variable = s.at("variable").get<std::string>();
    m.sweep_lo = s.at("lo").get<int>();
    m.sweep_hi = s.at("hi").get<int>();
    m.sweep_fixed = s.at("fixed").get<int>();
    return m;
}

void apply_config_file(const std::string& path, RunManifest& m) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string stripped;
        for (char ch : line) {
            if (ch == '#') break;
            stripped.push_back(ch == '=' ? ' ' : ch);
        }
        std::istringstream ls(stripped);
        std::string key;
        if (!(ls >> key)) continue;
        auto ctx = [&](const char* what) {
            return std::invalid_argument(path + ":" + std::to_string(lineno) + ": " + what);
        };
        auto read_double = [&]() {
            double v;
            if (!(ls >> v)) throw ctx("expected a number");
            return v;
        };
        auto read_int = [&]() {
            long long v;
            if (!(ls >> v)) throw ctx("expected an integer");
            return v;
        };
        auto read_bool = [&]() {
            std::string v;
            if (!(ls >> v)) throw ctx("expected true/false");
            if (v == "true" || v == "1") return true;
            if (v == "false" || v == "0") return false;
            throw ctx("expected true/false");
        };
        if (key == "m")
            m.config.m = static_cast<int>(read_int());
        else if (key == "n")
            m.config.n = static_cast<int>(read_int());
        else if (key == "p1_db") {
            m.p1_db = read_double();
            m.config.p1 = db_to_linear(m.p1_db);
        } else if (key == "p2_db") {
            m.p2_db = read_double();
            m.config.p2 = db_to_linear(m.p2_db);
        } else if (key == "pr_db") {
            m.pr_db = read_double();
            m.config.pr = db_to_linear(m.pr_db);
        } else if (key == "a")
            m.config.a = read_double();
        else if (key == "sigma2")
            m.config.sigma2 = read_double();
        else if (key == "seed")
            m.config.seed = static_cast<std::uint64_t>(read_int());
        else if (key == "per_relay_power")
            m.config.per_relay_power = read_bool();
        else if (key == "trials")
            m.trials = static_cast<int>(read_int());
        else if (key == "symbols")
            m.symbols = static_cast<int>(read_int());
        else if (key == "relay_groups")
            m.relay_groups = static_cast<int>(read_int());
        else if (key == "tol")
            m.options.tol = read_double();
        else if (key == "max_iters")
            m.options.max_iters = static_cast<int>(read_int());
        else if (key == "detmax_outer_rounds")
            m.options.detmax_outer_rounds = static_cast<int>(read_int());
        else if (key == "balance_tol")
            m.options.balance_tol = read_double();
        else if (key == "debug_checks")
            m.options.debug_checks = read_bool();
        else if (key == "threads")
            m.threads = static_cast<int>(read_int());
        else if (key == "out")
            ls >> m.out_dir;
        else if (key == "case")
            ls >> m.case_spec;
        else if (key == "points") {
            m.sweep_db.clear();
            std::string rest;
            std::getline(ls, rest);
            std::istringstream ps(rest);
            std::string tok;
            while (std::getline(ps, tok, ','))
                if (!tok.empty()) m.sweep_db.push_back(std::stod(tok));
        } else
            throw ctx(("unknown key: " + key).c_str());
    }
}

std::string experiment_csv(const ExperimentResult& result) {
    std::ostringstream os;
    os << "point_db,metric,mean,std_err,trials_converged,trials_total\n";
    for (const ExperimentRow& r : result.rows)
        os << fmt_double(r.point_db) << ',' << r.metric << ',' << fmt_double(r.mean) << ','
           << fmt_double(r.std_err) << ',' << r.trials_converged << ',' << r.trials_total << '\n';
    return os.str();
}

FlopConfig parse_case_spec(const std::string& text) {
    auto xpos = text.find('x');
    if (xpos == std::string::npos)
        throw std::invalid_argument("case spec must look like 2,2,2x6: " + text);
    std::string left = text.substr(0, xpos);
    std::string right = text.substr(xpos + 1);
    std::istringstream ls(left);
    std::string tok;
    int ni = -1, k = 0;
    while (std::getline(ls, tok, ',')) {
        if (tok.empty()) continue;
        int v = std::stoi(tok);
        if (ni == -1)
            ni = v;
        else if (v != ni)
            throw std::invalid_argument("case spec requires equal per-user antenna counts");
        ++k;
    }
    if (k < 1 || ni < 1) throw std::invalid_argument("empty case spec");
    FlopConfig c;
    c.k = k;
    c.n_i = ni;
    c.n_t = std::stoi(right);
    c.n_r = c.n_t;
    c.validate();
    return c;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
    if (!out) throw std::runtime_error("failed writing " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace twrb
