// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

namespace gensynth {

/// Shortest decimal that round-trips to the same double.
std::string format_double(double value);

}  // namespace gensynth
