#include "causalegm/csv.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "causalegm/errors.hpp"

namespace cegm {

namespace {

std::vector<std::string> split_commas(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    return cells;
}

double parse_cell(const std::string& cell, int line_no) {
    const char* begin = cell.c_str();
    char* end = nullptr;
    const double value = std::strtod(begin, &end);
    if (end == begin || *end != '\0')
        throw ParseError("line " + std::to_string(line_no) + ": '" + cell +
                         "' is not a number");
    if (!std::isfinite(value))
        throw ParseError("line " + std::to_string(line_no) + ": non-finite value '" + cell + "'");
    return value;
}

std::ofstream open_for_write(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    return out;
}

}  // namespace

std::string format_double(double value) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

std::string csv_quote(const std::string& cell) {
    if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
    std::string quoted = "\"";
    for (char c : cell) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    quoted += '"';
    return quoted;
}

void write_dataset_csv(const std::string& path, const Dataset& data,
                       const std::vector<std::string>& comments) {
    data.validate();
    std::ofstream out = open_for_write(path);
    for (const auto& comment : comments) out << "# " << comment << "\n";
    out << "x,y";
    for (int j = 1; j <= data.p(); ++j) out << ",v" << j;
    out << "\n";
    for (int i = 0; i < data.n(); ++i) {
        out << format_double(data.x(i, 0)) << ',' << format_double(data.y(i, 0));
        for (int j = 0; j < data.p(); ++j) out << ',' << format_double(data.v(i, j));
        out << "\n";
    }
    if (!out) throw IoError("failed writing '" + path + "'");
}

Dataset read_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");

    std::string line;
    int line_no = 0;
    // first non-comment line is the header
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        header = split_commas(line);
        break;
    }
    if (header.empty()) throw ParseError("'" + path + "' has no header line");
    if (header.size() < 3 || header[0] != "x" || header[1] != "y")
        throw ParseError("header must start with 'x,y,v1', got '" + line + "'");
    const int p = static_cast<int>(header.size()) - 2;
    for (int j = 0; j < p; ++j) {
        const std::string want = "v" + std::to_string(j + 1);
        if (header[2 + j] != want)
            throw ParseError("header column " + std::to_string(3 + j) + " should be '" + want +
                             "', got '" + header[2 + j] + "'");
    }

    std::vector<double> xs, ys, vs;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const auto cells = split_commas(line);
        if (static_cast<int>(cells.size()) != 2 + p)
            throw ParseError("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(2 + p) + " columns, got " +
                             std::to_string(cells.size()));
        xs.push_back(parse_cell(cells[0], line_no));
        ys.push_back(parse_cell(cells[1], line_no));
        for (int j = 0; j < p; ++j) vs.push_back(parse_cell(cells[2 + j], line_no));
    }
    if (xs.empty()) throw ParseError("'" + path + "' has no data rows");

    const int n = static_cast<int>(xs.size());
    Dataset data;
    data.x = Mat(n, 1);
    data.y = Mat(n, 1);
    data.v = Mat(n, p);
    for (int i = 0; i < n; ++i) {
        data.x(i, 0) = xs[i];
        data.y(i, 0) = ys[i];
        for (int j = 0; j < p; ++j) data.v(i, j) = vs[static_cast<std::size_t>(i) * p + j];
    }
    data.validate();
    return data;
}

void write_table_csv(const std::string& path, const std::vector<std::string>& columns,
                     const std::vector<std::vector<std::string>>& rows,
                     const std::vector<std::string>& comments) {
    std::ofstream out = open_for_write(path);
    for (const auto& comment : comments) out << "# " << comment << "\n";
    for (std::size_t j = 0; j < columns.size(); ++j)
        out << (j ? "," : "") << csv_quote(columns[j]);
    out << "\n";
    for (const auto& row : rows) {
        if (row.size() != columns.size())
            throw ShapeError("table row has " + std::to_string(row.size()) + " cells, header has " +
                             std::to_string(columns.size()));
        for (std::size_t j = 0; j < row.size(); ++j)
            out << (j ? "," : "") << csv_quote(row[j]);
        out << "\n";
    }
    if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace cegm
