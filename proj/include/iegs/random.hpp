#pragma once

// Deterministic Gaussian stream used for measurement noise. The layout is
// part of the reproducibility contract: every sample consumes exactly two
// 64-bit draws from a seeded mt19937_64 and maps them through Box-Muller,
//   u1, u2 in (0, 1],  z = sqrt(-2 ln u1) * cos(2 pi u2),
// so entry k of a vector always sees draws 2k and 2k+1 regardless of
// platform or standard library.

#include <cmath>
#include <cstdint>
#include <random>

namespace iegs {

class GaussianStream {
public:
    explicit GaussianStream(std::uint64_t seed) : engine_(seed) {}

    double next() {
        const double u1 = to_unit(engine_());
        const double u2 = to_unit(engine_());
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

private:
    static double to_unit(std::uint64_t r) {
        // (0, 1]: the +1 keeps log() finite at r == max
        return (static_cast<double>(r >> 11) + 1.0) * (1.0 / 9007199254740992.0);
    }
    static constexpr double kPi = 3.14159265358979323846;
    std::mt19937_64 engine_;
};

}  // namespace iegs
