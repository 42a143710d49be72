#include "vfvm/descriptors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string_view>

namespace vfvm {

namespace {

constexpr const char* kHeader = "id,med,iqr,vol,elo,flat,sphe,rat";
constexpr const char* kHeaderNoRat = "id,med,iqr,vol,elo,flat,sphe";

std::vector<std::string_view> split(std::string_view line)
{
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view trim(std::string_view s)
{
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

double parse_number(std::string_view cell, const std::string& source, std::size_t line,
                    const char* column)
{
  cell = trim(cell);
  if (!cell.empty() && cell.front() == '+')
    cell.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size())
    throw ParseError(source, line,
                     std::string("non-numeric value '") + std::string(cell) + "' in column " +
                       column);
  if (!std::isfinite(v))
    throw ParseError(source, line, std::string("non-finite value in column ") + column);
  return v;
}

} // namespace

std::string format_double(double v)
{
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

void write_dataset_csv(std::ostream& out, const Dataset& data)
{
  out << kHeader << '\n';
  for (const auto& r : data.rows) {
    const auto& d = r.d;
    out << r.id << ',' << format_double(d.med) << ',' << format_double(d.iqr) << ','
        << format_double(d.vol) << ',' << format_double(d.elo) << ',' << format_double(d.flat)
        << ',' << format_double(d.sphe) << ',';
    if (d.rat)
      out << format_double(*d.rat);
    out << '\n';
  }
}

void write_dataset_csv(const std::string& path, const Dataset& data)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw DataError("cannot write " + path);
  write_dataset_csv(out, data);
  if (!out)
    throw DataError("write failed: " + path);
}

Dataset read_dataset_csv(std::istream& in, const std::string& source)
{
  static constexpr const char* names[] = {"med", "iqr", "vol", "elo", "flat", "sphe", "rat"};
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line))
    throw ParseError(source, 1, "missing header");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0)
    line.erase(0, 3);
  const auto header = trim(line);
  bool has_rat = true;
  if (header == kHeaderNoRat)
    has_rat = false;
  else if (header != kHeader)
    throw ParseError(source, 1, std::string("expected header '") + kHeader + "'");
  const std::size_t ncols = has_rat ? 8 : 7;

  Dataset data;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty())
      continue;
    const auto cells = split(line);
    if (cells.size() != ncols)
      throw ParseError(source, lineno,
                       "expected " + std::to_string(ncols) + " columns, found " +
                         std::to_string(cells.size()));
    DatasetRow row;
    row.source = source;
    const auto idcell = trim(cells[0]);
    const auto [ptr, ec] = std::from_chars(idcell.data(), idcell.data() + idcell.size(), row.id);
    if (idcell.empty() || ec != std::errc() || ptr != idcell.data() + idcell.size())
      throw ParseError(source, lineno, "invalid id '" + std::string(idcell) + "'");
    double v[6];
    for (int c = 0; c < 6; ++c)
      v[c] = parse_number(cells[c + 1], source, lineno, names[c]);
    row.d.med = v[0];
    row.d.iqr = v[1];
    row.d.vol = v[2];
    row.d.elo = v[3];
    row.d.flat = v[4];
    row.d.sphe = v[5];
    if (has_rat && !trim(cells[7]).empty()) {
      const double r = parse_number(cells[7], source, lineno, "rat");
      if (r < 0.0 || r > 1.0)
        throw ParseError(source, lineno, "rat outside [0,1]");
      row.d.rat = r;
    }
    data.rows.push_back(std::move(row));
  }
  return data;
}

Dataset read_dataset_csv(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw DataError("cannot open " + path);
  return read_dataset_csv(in, path);
}

} // namespace vfvm
