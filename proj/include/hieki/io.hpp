#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hieki/grid.hpp"

namespace hieki {

/// Binary array file: three little-endian int64 extents (d0, d1, d2) followed
/// by d0*d1*d2 little-endian float64 values in row-major order.
/// A 2D field with n0 x n1 interior nodes is stored as shape (1, n1, n0);
/// a 1D field with n nodes as (1, 1, n).
struct ArrayFile {
  std::array<std::int64_t, 3> shape{1, 1, 0};
  std::vector<double> values;
};

void write_array(const std::filesystem::path& path, const ArrayFile& a);
ArrayFile read_array(const std::filesystem::path& path);

std::array<std::int64_t, 3> field_shape(const Domain& d, std::int64_t count = 1);

void write_field(const std::filesystem::path& path, const Field<double>& f);
/// Stacks several fields on the same grid along the first extent.
void write_fields(const std::filesystem::path& path, const std::vector<Field<double>>& fs);

/// Shortest decimal text that round-trips the double exactly.
std::string format_double(double v);
std::string format_optional(const std::optional<double>& v);

/// Minimal CSV reading for the files this library writes (no quoting).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  int column(const std::string& name) const;
};
CsvTable read_csv(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace hieki
