// SPDX-License-Identifier: Apache-2.0
#include "gensynth/format.hpp"

#include <array>
#include <charconv>
#include <cmath>

namespace gensynth {

std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    return std::string(buf.data(), end);
}

}  // namespace gensynth
