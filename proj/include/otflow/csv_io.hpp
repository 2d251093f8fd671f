#pragma once

#include <string>

#include "otflow/measure.hpp"

namespace otflow {

// Measures: header "x0,...,x{n-1},w", one atom per row.
// Plans:    header "i,j,mass", one support entry per row.
// Doubles are written with 17 significant digits so parsing them back is
// bit-exact; '.' is the decimal separator regardless of locale.

void write_measure_csv(const std::string& path, const DiscreteMeasure& mu);
DiscreteMeasure read_measure_csv(const std::string& path);

void write_plan_csv(const std::string& path, const CouplingPlan& plan);
CouplingPlan read_plan_csv(const std::string& path);

std::string format_double(double v);

}  // namespace otflow
