#ifndef TWRB_COMPLEXITY_HPP
#define TWRB_COMPLEXITY_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace twrb {

// Primitive complex-arithmetic operation counts (one FLOP = one real
// floating-point operation; a complex multiply-add costs 8).
enum class FlopKind {
    ProductRect,      // m x n times n x p: 8mnp - 2mp
    ProductGram,      // m x n times n x m: 4nm(m+1)
    SvdValues,        // sigma only, m <= n: 32(mn^2 - n^3/3)
    SvdValuesRight,   // sigma and right vectors, m <= n: 32(nm^2 + 2m^3)
    SvdFull,          // all factors, m <= n: 8(4n^2m + 8nm^2 + 9m^3)
    InverseReal,      // Gauss-Jordan, m x m real: 2m^3 - 2m^2 + m
    CholeskyComplex,  // m x m: 8m^3/3
    QrQl,             // m x n: 16(n^2m - nm^2 + m^3/3)
};

// Exact rational evaluation, rounded half-up to an integer at the end.
long long primitive_flops(FlopKind kind, int m, int n = 0, int p = 0);

enum class FlopAlgorithm { QlQr, Nonregenerative, Rbd, Cdbd };

std::string algorithm_name(FlopAlgorithm a);

struct FlopConfig {
    int k = 3;    // users
    int n_i = 2;  // receive antennas per user
    int n_t = 6;  // total transmit antennas (defaults to k * n_i)
    int n_r = 6;  // relay antennas (defaults to n_t)

    static FlopConfig standard(int k, int n_i);
    void validate() const;
    bool is_golden_case() const;  // the published (2,2,2)x6 reference point
};

struct FlopStep {
    std::string label;
    long long flops = 0;       // formula value, the ground truth
    long long printed = -1;    // published value at the golden case, -1 if none
    bool discrepant = false;   // |flops - printed| / printed > 0.5%
};

struct FlopReport {
    FlopAlgorithm algorithm = FlopAlgorithm::QlQr;
    FlopConfig config;
    std::vector<FlopStep> steps;
    long long total = 0;            // sum of formula step values
    // Sum comparable to the published per-table totals: steps whose printed
    // value disagrees with the formula beyond rounding contribute the
    // printed value instead. Equals `total` away from the golden case.
    long long reference_total = 0;
};

FlopReport table_flops(FlopAlgorithm algorithm, const FlopConfig& config);

enum class SweepVariable { Users, ReceiveAntennas };

struct SweepPoint {
    FlopConfig config;
    std::vector<FlopReport> reports;  // one per requested algorithm
};

std::vector<SweepPoint> complexity_sweep(const std::vector<FlopAlgorithm>& algorithms,
                                         SweepVariable variable, const std::vector<int>& values,
                                         int fixed_other);

// CSV rows: algorithm,k,n_i,n_t,step_label,flops,total with a TOTAL row per
// report.
std::string complexity_csv(const std::vector<FlopReport>& reports);

}  // namespace twrb

#endif
