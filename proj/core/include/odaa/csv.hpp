#pragma once

#include "odaa/econometrics.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace odaa {

/// Raw table: header cells and numeric body, first column kept as text.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::string> keys;  ///< first column of every data row
    std::vector<std::vector<double>> rows;
};

/// Parses a comma-separated file whose first column is an ISO-8601 date and
/// whose remaining columns are decimals. Errors name the file and line.
[[nodiscard]] CsvTable read_dated_csv(const std::filesystem::path& path);

/// Parses a headed CSV whose cells are all numeric (solver exports).
[[nodiscard]] CsvTable read_numeric_csv(const std::filesystem::path& path);

/// Price history in the dated layout; header cells after the first are asset labels.
[[nodiscard]] PriceSeries read_prices_csv(const std::filesystem::path& path, int periods_per_year = 52);

/// Return history in the dated layout.
[[nodiscard]] ReturnSeries read_returns_csv(const std::filesystem::path& path, int periods_per_year = 52);

/// Writes returns in the dated layout. Rows without dates get weekly dates
/// counted from 2000-01-07.
void write_returns_csv(const std::filesystem::path& path, const ReturnSeries& rs);

/// True for a valid calendar date written YYYY-MM-DD.
[[nodiscard]] bool is_iso_date(const std::string& s);

/// Shortest decimal text that reads back to the same double.
[[nodiscard]] std::string format_number(double v);

/// Minimal CSV emitter: quotes cells containing commas or quotes.
class CsvWriter {
public:
    explicit CsvWriter(const std::filesystem::path& path);

    CsvWriter& cell(const std::string& s);
    CsvWriter& cell(double v);
    CsvWriter& cell(long v);
    CsvWriter& cell(int v) { return cell(static_cast<long>(v)); }
    void end_row();
    void close();

private:
    std::filesystem::path path_;
    std::string buffer_;
    bool row_started_ = false;
};

}  // namespace odaa
