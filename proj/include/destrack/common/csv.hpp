#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace destrack::csv {

/// Shortest decimal string that round-trips to the same double.
std::string format_double(double v);

double parse_double(std::string_view s);
long long parse_int(std::string_view s);

/// Minimal reader for the unquoted comma-separated files this project
/// writes. Fields never contain commas or quotes.
class Table {
public:
    /// Reads the whole file. Throws InputError if it cannot be opened and
    /// FormatError if a row has the wrong field count.
    static Table read(const std::filesystem::path& path);

    /// Verifies the header equals `expected` exactly, in order.
    void require_header(const std::vector<std::string>& expected) const;

    std::size_t column(std::string_view name) const;
    const std::vector<std::string>& header() const { return header_; }
    const std::vector<std::vector<std::string>>& rows() const { return rows_; }
    std::size_t size() const { return rows_.size(); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

class Writer {
public:
    Writer(const std::filesystem::path& path, const std::vector<std::string>& header);

    Writer& field(std::string_view s);
    Writer& field(double v);
    Writer& field(long long v);
    Writer& field(int v) { return field(static_cast<long long>(v)); }
    Writer& field(std::size_t v) { return field(static_cast<long long>(v)); }
    void end_row();
    void close();

private:
    std::ofstream out_;
    std::filesystem::path path_;
    std::size_t columns_;
    std::size_t in_row_ = 0;
};

std::vector<std::string> split(std::string_view line, char sep = ',');
std::string_view trim(std::string_view s);

}  // namespace destrack::csv
