#pragma once

#include <string>

#include "ppa/milp.hpp"

namespace ppa {

/// Renders the model as MPS text: fixed format when every name fits the
/// 8-character fields without colliding, free format otherwise. Column
/// order equals declaration order; binaries are declared with BV bounds.
std::string export_mps(const MilpModel& model);

void write_mps_file(const std::string& path, const MilpModel& model);

}  // namespace ppa
