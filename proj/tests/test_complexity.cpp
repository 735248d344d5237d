#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "twrb/complexity.hpp"

using namespace twrb;

TEST_SUITE_BEGIN("complexity");

TEST_CASE("primitive operation counts") {
    CHECK(primitive_flops(FlopKind::ProductRect, 2, 2, 2) == 56);  // 8*8 - 2*4
    CHECK(primitive_flops(FlopKind::ProductGram, 2, 3) == 72);     // 4*3*2*3
    CHECK(primitive_flops(FlopKind::CholeskyComplex, 6) == 576);   // 8*216/3
    CHECK(primitive_flops(FlopKind::InverseReal, 3) == 39);        // 54 - 18 + 3
    // 16(36*2 - 6*4 + 8/3) = 810.67 rounded half-up
    CHECK(primitive_flops(FlopKind::QrQl, 2, 6) == 811);
    CHECK(primitive_flops(FlopKind::SvdValues, 2, 4) == 341);       // 32(32 - 64/3)
    CHECK(primitive_flops(FlopKind::SvdValuesRight, 2, 4) == 1024); // 32(16 + 16)
    CHECK(primitive_flops(FlopKind::SvdFull, 2, 4) == 2624);        // 8(128 + 128 + 72)

    CHECK_THROWS_AS(primitive_flops(FlopKind::SvdValues, 4, 2), std::invalid_argument);
    CHECK_THROWS_AS(primitive_flops(FlopKind::ProductRect, 2, 2, 0), std::invalid_argument);
    CHECK_THROWS_AS(primitive_flops(FlopKind::InverseReal, 0), std::invalid_argument);
}

TEST_CASE("golden case step values") {
    FlopConfig g = FlopConfig::standard(3, 2);
    REQUIRE(g.is_golden_case());

    FlopReport ql = table_flops(FlopAlgorithm::QlQr, g);
    CHECK(ql.steps[1].flops == 4864);
    CHECK(ql.steps[2].flops == 4864);
    CHECK(ql.steps[3].flops == 696);
    CHECK(ql.steps[4].flops == 696);
    CHECK(ql.steps[6].flops == 2826);
    CHECK(ql.steps[7].flops == 3168);
    // published-versus-formula deltas stay inside rounding noise
    CHECK(ql.steps[0].flops == 1548);   // table prints 1560
    CHECK(ql.steps[5].flops == 14892);  // table prints 14856
    CHECK_FALSE(ql.steps[0].discrepant);
    CHECK_FALSE(ql.steps[5].discrepant);
    CHECK(ql.total == 33554);
    CHECK(ql.reference_total == ql.total);
    CHECK(std::llabs(ql.total - 33530) * 1000 <= 5 * 33530);  // within 0.5%

    FlopReport nr = table_flops(FlopAlgorithm::Nonregenerative, g);
    CHECK(nr.steps[0].flops == 13248);
    CHECK(nr.steps[1].flops == 13248);
    CHECK(nr.steps[2].flops == 432);
    CHECK(nr.steps[3].flops == 432);
    CHECK(nr.steps[4].flops == 4212);
    CHECK(nr.steps[5].flops == 13272);
    CHECK(nr.steps[6].flops == 462);
    CHECK(nr.total == 45306);

    FlopReport rbd = table_flops(FlopAlgorithm::Rbd, g);
    CHECK(rbd.steps[0].flops == 21504);
    CHECK(rbd.steps[2].flops == 5184);
    CHECK(rbd.steps[3].flops == 552);
    CHECK(rbd.steps[4].flops == 13248);
    // step 2 of the published table disagrees with its own formula by 4x;
    // the reference total pins that step to the printed value
    CHECK(rbd.steps[1].flops == 1272);
    CHECK(rbd.steps[1].printed == 336);
    CHECK(rbd.steps[1].discrepant);
    CHECK(rbd.reference_total == 40824);

    FlopReport cd = table_flops(FlopAlgorithm::Cdbd, g);
    CHECK(cd.steps[0].flops == 13248);
    CHECK(cd.steps[1].flops == 13248);
    CHECK(cd.steps[2].flops == 2088);
    CHECK(cd.steps[3].flops == 508);
    CHECK(cd.steps[4].flops == 2736);
    CHECK(cd.steps[5].flops == 2336);
    CHECK(cd.steps[6].flops == 474);
    CHECK(cd.total == 34638);
    CHECK(cd.reference_total == 34638);
}

TEST_CASE("reference reductions match the published percentages") {
    FlopConfig g = FlopConfig::standard(3, 2);
    double ours = static_cast<double>(table_flops(FlopAlgorithm::QlQr, g).reference_total);
    double rbd = static_cast<double>(table_flops(FlopAlgorithm::Rbd, g).reference_total);
    double nr = static_cast<double>(table_flops(FlopAlgorithm::Nonregenerative, g).reference_total);
    double cd = static_cast<double>(table_flops(FlopAlgorithm::Cdbd, g).reference_total);
    CHECK(100.0 * (rbd - ours) / rbd == doctest::Approx(17.87).epsilon(0.02));
    CHECK(100.0 * (nr - ours) / nr == doctest::Approx(25.99).epsilon(0.02));
    CHECK(100.0 * (cd - ours) / cd == doctest::Approx(3.20).epsilon(0.05));
}

TEST_CASE("away from the golden case no printed values attach") {
    FlopReport r = table_flops(FlopAlgorithm::Rbd, FlopConfig::standard(4, 2));
    for (const FlopStep& s : r.steps) {
        CHECK(s.printed == -1);
        CHECK_FALSE(s.discrepant);
    }
    CHECK(r.reference_total == r.total);
}

TEST_CASE("sweeps are monotone in K and reproducible") {
    std::vector<FlopAlgorithm> algos = {FlopAlgorithm::QlQr};
    auto sweep = complexity_sweep(algos, SweepVariable::Users, {2, 3, 4, 5, 6}, 2);
    long long prev = 0;
    for (const SweepPoint& p : sweep) {
        CHECK(p.reports[0].total > prev);
        prev = p.reports[0].total;
    }
    auto again = complexity_sweep(algos, SweepVariable::Users, {2, 3, 4, 5, 6}, 2);
    for (size_t i = 0; i < sweep.size(); ++i)
        CHECK(sweep[i].reports[0].total == again[i].reports[0].total);

    CHECK_THROWS_AS(complexity_sweep(algos, SweepVariable::Users, {}, 2), std::invalid_argument);
}

TEST_CASE("proposed design has the lowest count at the reference case") {
    FlopConfig g = FlopConfig::standard(3, 2);
    long long ours = table_flops(FlopAlgorithm::QlQr, g).total;
    long long ours_ref = table_flops(FlopAlgorithm::QlQr, g).reference_total;
    for (FlopAlgorithm a :
         {FlopAlgorithm::Nonregenerative, FlopAlgorithm::Rbd, FlopAlgorithm::Cdbd}) {
        CHECK(ours < table_flops(a, g).total);
        CHECK(ours_ref < table_flops(a, g).reference_total);
    }
    // Note: the published sweep figures claim this ordering for all K, but
    // the printed step formulas scale as K * NT^3 for the proposed design
    // and overtake CD-BD around K = 4; the formulas are authoritative here.
}

TEST_CASE("csv layout") {
    std::vector<FlopReport> reports = {table_flops(FlopAlgorithm::QlQr, FlopConfig::standard(3, 2))};
    std::string csv = complexity_csv(reports);
    CHECK(csv.find("algorithm,k,n_i,n_t,step_label,flops,total\n") == 0);
    CHECK(csv.find("qlqr,3,2,6,TOTAL,33554,33554") != std::string::npos);
    CHECK(csv.find("\"QL of (H11 V1), (H21 V1)\"") != std::string::npos);
}

TEST_SUITE_END();
