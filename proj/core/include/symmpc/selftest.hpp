#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace symmpc {

// Central-difference error for every differentiable op at small randomized
// shapes. All entries should sit far below 1e-4.
std::vector<std::pair<std::string, double>> op_gradient_errors(std::uint64_t seed);

// Oracle + gradient smoke suite; prints one line per check. True when clean.
bool selftest(std::ostream& out);

} // namespace symmpc
