#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace yieldcast {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column index for a header name; throws naming the column when absent.
  std::size_t column(const std::string& name, const std::string& path) const;
};

// Minimal RFC-style reader: comma separated, double quotes with "" escapes.
CsvTable read_csv(const std::string& path);
CsvTable parse_csv(const std::string& text, const std::string& path);

std::string to_csv(const std::vector<std::string>& header,
                   const std::vector<std::vector<std::string>>& rows);

}  // namespace yieldcast
