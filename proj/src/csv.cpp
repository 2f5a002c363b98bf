#include "wphist/csv.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

#include "wphist/errors.hpp"

namespace wphist {

std::string format_double(double value) {
    std::array<char, 64> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value,
                             std::chars_format::general, 17);
    return std::string(buf.data(), res.ptr);
}

namespace {

double parse_field(const std::string& field, std::size_t row, std::size_t col) {
    const char* begin = field.data();
    const char* end = begin + field.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end > begin && (end[-1] == ' ' || end[-1] == '\t' || end[-1] == '\r'))
        --end;
    double value = 0.0;
    auto res = std::from_chars(begin, end, value);
    if (res.ec != std::errc() || res.ptr != end) {
        std::ostringstream msg;
        msg << "malformed numeric field at row " << row << ", column " << col;
        throw DataError(msg.str());
    }
    return value;
}

} // namespace

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path,
                                bool skip_header) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open CSV file: " + path.string());

    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    bool first = true;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (first && skip_header) {
            first = false;
            continue;
        }
        first = false;
        if (line.empty() || line == "\r") continue;
        std::vector<double> row;
        std::size_t start = 0;
        std::size_t col = 0;
        while (true) {
            std::size_t comma = line.find(',', start);
            std::string field = line.substr(
                start, comma == std::string::npos ? std::string::npos
                                                  : comma - start);
            ++col;
            row.push_back(parse_field(field, line_no, col));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (width == 0) {
            width = row.size();
        } else if (row.size() != width) {
            std::ostringstream msg;
            msg << "row " << line_no << " has " << row.size()
                << " fields, expected " << width;
            throw DataError(msg.str());
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError("CSV file is empty: " + path.string());

    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(width));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return m;
}

void write_matrix_csv(const std::filesystem::path& path,
                      const Eigen::MatrixXd& m) {
    std::ofstream out(path);
    if (!out) throw PersistenceError("cannot write CSV file: " + path.string());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j > 0) out << ',';
            out << format_double(m(i, j));
        }
        out << '\n';
    }
    if (!out) throw PersistenceError("write failed: " + path.string());
}

} // namespace wphist
