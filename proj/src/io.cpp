#include "qdt/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "qdt/errors.hpp"

namespace qdt {

std::string format_g17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

void write_csv(const std::filesystem::path& path, const Mat& m) {
    std::ofstream out(path);
    if (!out) throw config_error("write_csv: cannot open " + path.string());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << format_g17(m(i, j));
        }
        out << '\n';
    }
    if (!out) throw config_error("write_csv: write failed for " + path.string());
}

Mat read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw config_error("read_csv: cannot open " + path.string());

    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::size_t pos = 0;
        while (pos <= line.size()) {
            std::size_t comma = line.find(',', pos);
            if (comma == std::string::npos) comma = line.size();
            const std::string cell = line.substr(pos, comma - pos);
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                if (used != cell.size())
                    throw config_error("read_csv: trailing characters in cell");
            } catch (const config_error&) {
                throw;
            } catch (const std::exception&) {
                throw config_error("read_csv: malformed number '" + cell + "' in " +
                                   path.string());
            }
            pos = comma + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw config_error("read_csv: ragged rows in " + path.string());
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw config_error("read_csv: empty file " + path.string());

    Mat m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
    return m;
}

}  // namespace qdt
