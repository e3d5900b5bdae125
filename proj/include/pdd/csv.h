#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace pdd {

// RFC 4180 style: fields containing ',', '"', CR or LF are quoted and quotes
// doubled. Rows end with "\n".
std::string csv_field(std::string_view value);
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column; throws ReportError when absent.
  std::size_t column(std::string_view name) const;
};

// Throws ReportError on unterminated quotes or ragged rows.
CsvTable read_csv(std::istream& in);

// Fixed-point rendering used for every numeric CSV cell, so output bytes do
// not depend on stream state.
std::string format_fixed(double value, int decimals = 4);

}  // namespace pdd
