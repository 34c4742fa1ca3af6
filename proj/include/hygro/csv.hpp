#pragma once

// Minimal CSV reading and writing for the tool's tabular files. Every file written
// here starts with a metadata comment line
//
//   #schema_version=1,schema=<name>[,key=value...]
//
// followed by a header row. Readers skip any line starting with '#'.

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace hygro::csv {

inline constexpr int kSchemaVersion = 1;

/// Shortest representation that round-trips to the same double.
std::string format(double v);

class Writer {
 public:
  Writer(std::ostream& os, const std::string& schema, std::vector<std::string> header,
         const std::vector<std::pair<std::string, std::string>>& meta = {});
  void row(const std::vector<std::string>& cells);

 private:
  std::ostream& os_;
  std::size_t columns_;
};

struct Table {
  std::string source;
  int schema_version = 0;  // 0 when the file carries no metadata line
  std::map<std::string, std::string> meta;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line;  // 1-based source line of each row

  /// Column index; throws ConfigError naming the source when absent.
  std::size_t column(const std::string& name) const;
  /// Parses a cell as a double; throws ConfigError with line and column on failure.
  double number(std::size_t row, std::size_t col) const;
};

/// Throws ConfigError on ragged rows or an unsupported schema version.
Table read(std::istream& is, const std::string& source);
Table read_file(const std::string& path);

}  // namespace hygro::csv
