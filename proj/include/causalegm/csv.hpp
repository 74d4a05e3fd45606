#pragma once

#include <string>
#include <vector>

#include "causalegm/model.hpp"

namespace cegm {

// 17 significant digits, enough for doubles to survive a write/read cycle
std::string format_double(double value);

// Doubles inner quotes and wraps the cell when it holds a comma, quote or
// newline, for callers appending rows outside write_table_csv.
std::string csv_quote(const std::string& cell);

// Writes `x,y,v1,...,vp` rows preceded by `#`-prefixed comment lines
// (typically the config hash and seed, so any file documents its own origin).
void write_dataset_csv(const std::string& path, const Dataset& data,
                       const std::vector<std::string>& comments);

// Parses a dataset file back: comment lines are skipped, the header must
// match the schema exactly, and every cell must be a finite double. Errors
// carry the offending line number or column name.
Dataset read_dataset_csv(const std::string& path);

// Generic table writer for curves, traces and reports; cells containing
// commas or quotes are quoted.
void write_table_csv(const std::string& path, const std::vector<std::string>& columns,
                     const std::vector<std::vector<std::string>>& rows,
                     const std::vector<std::string>& comments);

}  // namespace cegm
