#pragma once

#include <iosfwd>
#include <string>

#include "menn/solver.hpp"

namespace menn {

// Text format:
//   menn-model v1 n=<n> eps=<eps>
//   n lines of n space-separated entries of C, row-major, %.17g
// Only C and eps are stored; objective and rank are recomputed by callers.

void write_model(std::ostream& out, const MetricModel& model);
MetricModel read_model(std::istream& in);

void save_model(const std::string& path, const MetricModel& model);
MetricModel load_model(const std::string& path);

}  // namespace menn
