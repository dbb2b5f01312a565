#pragma once

#include <string>
#include <vector>

#include "mfglab/grid.hpp"

namespace mfg {

/// Shortest round-trippable decimal form; keeps CSV/JSON output bit-stable
/// across runs.
std::string format_double(double v);

void ensure_dir(const std::string& dir);

/// Column-oriented CSV with a one-line header. All values dimensionless.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns);

/// Field dump: first column x, one column per kept time level.
void write_field_csv(const std::string& path, const Field& field, int stride);

void write_text_file(const std::string& path, const std::string& body);

} // namespace mfg
