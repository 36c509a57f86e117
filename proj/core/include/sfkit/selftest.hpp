#pragma once

#include "sfkit/metrics.hpp"

namespace sfkit {

/// Runs the built-in invariant suite (numerics oracles, curve bijection and
/// adjacency, centroid conservation, scan equivalence, gradients, causality,
/// isolation) and reports one boolean per check plus "all_pass".
MetricsReport run_selftest(std::uint64_t seed);

}  // namespace sfkit
