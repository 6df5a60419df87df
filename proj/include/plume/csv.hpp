#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace plume::csv {

using Row = std::vector<std::string>;

// RFC 4180 reader: comma separated, double-quoted fields may contain commas,
// newlines and doubled quotes. CRLF and LF line endings are both accepted and a
// leading UTF-8 byte order mark is skipped. Blank lines are dropped.
std::vector<Row> parse(std::string_view text);

std::string quote(std::string_view field);
void write_row(std::ostream& out, const Row& row);

std::string trim(std::string_view s);

} // namespace plume::csv
