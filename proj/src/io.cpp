#include "hieki/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hieki {

namespace {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian platforms are not supported");

template <typename T>
void put_le(std::ostream& out, T v) {
  auto bits = std::bit_cast<std::array<char, sizeof(T)>>(v);
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(bits.begin(), bits.end());
  out.write(bits.data(), bits.size());
}

template <typename T>
T get_le(std::istream& in) {
  std::array<char, sizeof(T)> bits{};
  if (!in.read(bits.data(), bits.size())) throw std::runtime_error("truncated array file");
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(bits.begin(), bits.end());
  return std::bit_cast<T>(bits);
}

}  // namespace

void write_array(const std::filesystem::path& path, const ArrayFile& a) {
  const auto n = a.shape[0] * a.shape[1] * a.shape[2];
  if (n != static_cast<std::int64_t>(a.values.size()))
    throw std::invalid_argument("array shape does not match value count");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (auto e : a.shape) put_le<std::int64_t>(out, e);
  for (double v : a.values) put_le<double>(out, v);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

ArrayFile read_array(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  ArrayFile a;
  for (auto& e : a.shape) {
    e = get_le<std::int64_t>(in);
    if (e < 0) throw std::runtime_error("negative extent in " + path.string());
  }
  const auto n = a.shape[0] * a.shape[1] * a.shape[2];
  a.values.resize(static_cast<std::size_t>(n));
  for (auto& v : a.values) v = get_le<double>(in);
  if (in.peek() != std::char_traits<char>::eof())
    throw std::runtime_error("trailing bytes in " + path.string());
  return a;
}

std::array<std::int64_t, 3> field_shape(const Domain& d, std::int64_t count) {
  return {count, d.interior(1), d.interior(0)};
}

void write_field(const std::filesystem::path& path, const Field<double>& f) {
  write_fields(path, {f});
}

void write_fields(const std::filesystem::path& path, const std::vector<Field<double>>& fs) {
  if (fs.empty()) throw std::invalid_argument("no fields to write");
  ArrayFile a;
  a.shape = field_shape(fs.front().domain, static_cast<std::int64_t>(fs.size()));
  for (const auto& f : fs) {
    if (!f.domain.same_grid(fs.front().domain))
      throw std::invalid_argument("stacked fields must share a grid");
    a.values.insert(a.values.end(), f.values.data(), f.values.data() + f.values.size());
  }
  write_array(path, a);
}

std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  return std::string(buf.data(), p);
}

std::string format_optional(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  throw std::runtime_error("CSV has no column '" + name + "'");
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
  };
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty CSV " + path.string());
  t.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto row = split(line);
    row.resize(t.header.size());
    t.rows.push_back(std::move(row));
  }
  return t;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace hieki
