#include "geoclus/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace geoclus::io {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string CsvHeader::get(const std::string& key, const std::string& fallback) const {
    for (const auto& [k, v] : extras)
        if (k == key) return v;
    return fallback;
}

void save_csv_matrix(const std::filesystem::path& path, const Tensor& matrix,
                     const CsvHeader& header) {
    if (matrix.rank() != 2 || matrix.size() == 0)
        throw std::invalid_argument("save_csv_matrix: need a non-empty rank-2 matrix");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << "# geoclus kind=" << (header.kind.empty() ? "matrix" : header.kind)
        << " rows=" << matrix.rows() << " cols=" << matrix.cols();
    for (const auto& [k, v] : header.extras) out << " " << k << "=" << v;
    out << "\n";
    for (std::size_t r = 0; r < matrix.rows(); ++r) {
        for (std::size_t c = 0; c < matrix.cols(); ++c) {
            if (c) out << ",";
            out << format_double(matrix.at(r, c));
        }
        out << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

namespace {

CsvHeader parse_header_line(const std::string& line) {
    CsvHeader h;
    std::istringstream is(line);
    std::string tok;
    is >> tok;  // '#'
    is >> tok;  // 'geoclus'
    while (is >> tok) {
        auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        std::string key = tok.substr(0, eq);
        std::string val = tok.substr(eq + 1);
        if (key == "kind")
            h.kind = val;
        else if (key == "rows")
            h.rows = std::stoul(val);
        else if (key == "cols")
            h.cols = std::stoul(val);
        else
            h.extras.emplace_back(key, val);
    }
    return h;
}

}  // namespace

CsvFile load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path.string());
    CsvFile file;
    std::string line;
    std::vector<double> values;
    std::size_t cols = 0, row_index = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (!saw_header && line.rfind("# geoclus", 0) == 0) {
                file.header = parse_header_line(line);
                saw_header = true;
            }
            continue;
        }
        ++row_index;
        std::size_t col_index = 0, pos = 0;
        while (pos <= line.size()) {
            std::size_t comma = line.find(',', pos);
            std::string cell = line.substr(pos, comma == std::string::npos ? std::string::npos
                                                                           : comma - pos);
            ++col_index;
            try {
                std::size_t used = 0;
                double v = std::stod(cell, &used);
                if (used != cell.size()) throw std::invalid_argument("trailing characters");
                values.push_back(v);
            } catch (const std::exception&) {
                throw std::runtime_error("parse error in " + path.string() + " at row " +
                                         std::to_string(row_index) + ", column " +
                                         std::to_string(col_index) + ": '" + cell + "'");
            }
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (cols == 0)
            cols = col_index;
        else if (col_index != cols)
            throw std::runtime_error("ragged CSV in " + path.string() + " at row " +
                                     std::to_string(row_index));
    }
    if (values.empty()) throw std::runtime_error("empty CSV: " + path.string());
    std::size_t rows = values.size() / cols;
    file.matrix = Tensor::matrix(rows, cols, std::move(values));
    if (saw_header && file.header.rows != 0 &&
        (file.header.rows != file.matrix.rows() || file.header.cols != file.matrix.cols()))
        throw std::runtime_error("CSV header shape disagrees with contents: " + path.string());
    return file;
}

void write_pgm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               std::span<const double> values) {
    if (values.size() != width * height)
        throw std::invalid_argument("write_pgm: value count != width*height");
    double lo = values[0], hi = values[0];
    for (double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << "P5\n" << width << " " << height << "\n255\n";
    double range = hi - lo;
    for (double v : values) {
        unsigned char byte =
            range == 0.0
                ? static_cast<unsigned char>(128)
                : static_cast<unsigned char>(std::min(255.0, std::max(0.0, (v - lo) / range * 255.0 + 0.5)));
        out.put(static_cast<char>(byte));
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace geoclus::io
