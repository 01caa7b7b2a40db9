#pragma once

#include <cstdint>
#include <string>

namespace dgan {

struct GradCheckReport {
    std::size_t networks = 0;
    std::size_t coordinates = 0;
    double max_rel_error = 0.0;
    std::string worst_case; // human-readable location of the worst coordinate
};

// Compares analytic backward() against central finite differences (h = 1e-5)
// on `count` randomly shaped small networks (up to 3 dense layers, widths up
// to 8, cycling through every activation kind). Relative error uses
// |a - n| / max(|a|, |n|, 1e-6). inject_sign_flip negates one analytic
// coordinate per network, a deliberate bug the check must catch.
GradCheckReport run_gradcheck(std::uint64_t seed, std::size_t count, bool inject_sign_flip);

constexpr double kGradCheckTolerance = 1e-4;

} // namespace dgan
