#pragma once

#include <iosfwd>
#include <string>

#include "lqdemix/solvers.hpp"

namespace lqdemix {

/// Shortest decimal form that round-trips to the same double.
std::string format_number(double v);

/*
 * JSON document with fields x1, x2 (arrays of rows), objective_trace,
 * residual_trace, iterate_gap_trace, iterations, converged, plus the
 * resolved parameters and any warnings.
 */
std::string to_json(const SolveResult& result, int indent = 1);

}  // namespace lqdemix
