#include "odaa/csv.hpp"

#include "odaa/errors.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

namespace odaa {

namespace {

std::string trim(std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

[[noreturn]] void fail(const std::filesystem::path& path, long line, const std::string& what) {
    std::ostringstream os;
    os << path.string() << ":" << line << ": " << what;
    throw InputError(os.str());
}

bool parse_double(const std::string& s, double& v) {
    if (s.empty()) return false;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (*first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    return ec == std::errc() && ptr == last && std::isfinite(v);
}

std::string weekly_date(long i) {
    using namespace std::chrono;
    const sys_days start = year{2000} / January / 7;
    const year_month_day d{start + days{7 * i}};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                  static_cast<unsigned>(d.day()));
    return buf;
}

}  // namespace

bool is_iso_date(const std::string& s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9}) {
        if (s[i] < '0' || s[i] > '9') return false;
    }
    const int y = std::stoi(s.substr(0, 4));
    const unsigned m = static_cast<unsigned>(std::stoi(s.substr(5, 2)));
    const unsigned d = static_cast<unsigned>(std::stoi(s.substr(8, 2)));
    return std::chrono::year_month_day{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}}.ok();
}

CsvTable read_dated_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    CsvTable t;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        if (trim(line).empty()) continue;
        auto cells = split(line);
        if (t.header.empty()) {
            if (cells.size() < 2) fail(path, lineno, "header needs a date column and at least one asset");
            for (std::size_t j = 1; j < cells.size(); ++j) {
                if (cells[j].empty()) fail(path, lineno, "empty asset label in column " + std::to_string(j + 1));
            }
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size()) {
            fail(path, lineno,
                 "expected " + std::to_string(t.header.size()) + " fields, found " + std::to_string(cells.size()));
        }
        if (!is_iso_date(cells[0])) fail(path, lineno, "'" + cells[0] + "' is not an ISO-8601 date (YYYY-MM-DD)");
        if (!t.keys.empty() && cells[0] <= t.keys.back()) fail(path, lineno, "dates must be strictly increasing");
        std::vector<double> row(cells.size() - 1);
        for (std::size_t j = 1; j < cells.size(); ++j) {
            if (!parse_double(cells[j], row[j - 1])) {
                fail(path, lineno, "column " + std::to_string(j + 1) + ": '" + cells[j] + "' is not a number");
            }
        }
        t.keys.push_back(cells[0]);
        t.rows.push_back(std::move(row));
    }
    if (t.header.empty()) fail(path, lineno, "file is empty");
    if (t.rows.empty()) fail(path, lineno, "no data rows");
    return t;
}

CsvTable read_numeric_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    CsvTable t;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto cells = split(line);
        if (t.header.empty()) {
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size()) {
            fail(path, lineno,
                 "expected " + std::to_string(t.header.size()) + " fields, found " + std::to_string(cells.size()));
        }
        std::vector<double> row(cells.size());
        for (std::size_t j = 0; j < cells.size(); ++j) {
            if (!parse_double(cells[j], row[j])) {
                fail(path, lineno, "column " + std::to_string(j + 1) + ": '" + cells[j] + "' is not a number");
            }
        }
        t.rows.push_back(std::move(row));
    }
    if (t.header.empty()) fail(path, lineno, "file is empty");
    return t;
}

namespace {

Eigen::MatrixXd to_matrix(const CsvTable& t) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(t.header.size() - 1));
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        for (std::size_t j = 0; j < t.rows[i].size(); ++j) {
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = t.rows[i][j];
        }
    }
    return m;
}

}  // namespace

PriceSeries read_prices_csv(const std::filesystem::path& path, int periods_per_year) {
    const CsvTable t = read_dated_csv(path);
    PriceSeries ps;
    ps.labels.assign(t.header.begin() + 1, t.header.end());
    ps.dates = t.keys;
    ps.prices = to_matrix(t);
    ps.periods_per_year = periods_per_year;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        for (std::size_t j = 0; j < t.rows[i].size(); ++j) {
            if (!(t.rows[i][j] > 0.0)) {
                throw InputError(path.string() + ": price on " + t.keys[i] + " for " + ps.labels[j] +
                                 " is not positive");
            }
        }
    }
    return ps;
}

ReturnSeries read_returns_csv(const std::filesystem::path& path, int periods_per_year) {
    const CsvTable t = read_dated_csv(path);
    ReturnSeries rs;
    rs.labels.assign(t.header.begin() + 1, t.header.end());
    rs.dates = t.keys;
    rs.returns = to_matrix(t);
    rs.periods_per_year = periods_per_year;
    return rs;
}

std::string format_number(double v) {
    if (std::isnan(v)) return "NaN";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

void write_returns_csv(const std::filesystem::path& path, const ReturnSeries& rs) {
    CsvWriter w(path);
    w.cell("date");
    for (const auto& l : rs.labels) w.cell(l);
    w.end_row();
    for (Eigen::Index i = 0; i < rs.returns.rows(); ++i) {
        w.cell(static_cast<std::size_t>(i) < rs.dates.size() ? rs.dates[static_cast<std::size_t>(i)] : weekly_date(i));
        for (Eigen::Index j = 0; j < rs.returns.cols(); ++j) w.cell(rs.returns(i, j));
        w.end_row();
    }
    w.close();
}

CsvWriter::CsvWriter(const std::filesystem::path& path) : path_(path) {}

CsvWriter& CsvWriter::cell(const std::string& s) {
    if (row_started_) buffer_ += ',';
    row_started_ = true;
    if (s.find_first_of(",\"\n") != std::string::npos) {
        buffer_ += '"';
        for (char c : s) {
            if (c == '"') buffer_ += '"';
            buffer_ += c;
        }
        buffer_ += '"';
    } else {
        buffer_ += s;
    }
    return *this;
}

CsvWriter& CsvWriter::cell(double v) { return cell(format_number(v)); }

CsvWriter& CsvWriter::cell(long v) { return cell(std::to_string(v)); }

void CsvWriter::end_row() {
    buffer_ += '\n';
    row_started_ = false;
}

void CsvWriter::close() {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::binary);
    if (!out) throw InputError("cannot write " + path_.string());
    out << buffer_;
    if (!out) throw InputError("failed writing " + path_.string());
}

}  // namespace odaa
