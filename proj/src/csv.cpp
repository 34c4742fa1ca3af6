#include "hygro/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "hygro/errors.hpp"

namespace hygro::csv {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::string format(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

Writer::Writer(std::ostream& os, const std::string& schema, std::vector<std::string> header,
               const std::vector<std::pair<std::string, std::string>>& meta)
    : os_(os), columns_(header.size()) {
  os_ << "#schema_version=" << kSchemaVersion << ",schema=" << schema;
  for (const auto& [k, v] : meta) os_ << ',' << k << '=' << v;
  os_ << '\n';
  row(header);
}

void Writer::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_)
    throw std::logic_error("csv row has " + std::to_string(cells.size()) + " cells, expected " +
                           std::to_string(columns_));
  for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << cells[i];
  os_ << '\n';
}

std::size_t Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw ConfigError(source + ": missing column '" + name + "'");
}

double Table::number(std::size_t r, std::size_t c) const {
  const std::string& s = rows[r][c];
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    std::ostringstream os;
    os << source << ":" << line[r] << ": column '" << header[c] << "': '" << s
       << "' is not a number";
    throw ConfigError(os.str());
  }
  return v;
}

Table read(std::istream& is, const std::string& source) {
  Table t;
  t.source = source;
  std::string raw;
  int lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (line[0] == '#') {
      for (const auto& kv : split(line.substr(1))) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        t.meta[kv.substr(0, eq)] = kv.substr(eq + 1);
      }
      continue;
    }
    auto cells = split(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      std::ostringstream os;
      os << source << ":" << lineno << ": expected " << t.header.size() << " cells, found "
         << cells.size();
      throw ConfigError(os.str());
    }
    t.rows.push_back(std::move(cells));
    t.line.push_back(lineno);
  }
  if (t.header.empty()) throw ConfigError(source + ": no header row");
  if (auto it = t.meta.find("schema_version"); it != t.meta.end()) {
    try {
      t.schema_version = std::stoi(it->second);
    } catch (const std::exception&) {
      throw ConfigError(source + ": malformed schema_version '" + it->second + "'");
    }
    if (t.schema_version != kSchemaVersion)
      throw ConfigError(source + ": unsupported schema_version " + it->second);
  }
  return t;
}

Table read_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open " + path);
  return read(is, path);
}

}  // namespace hygro::csv
