#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "geoclus/tensor.hpp"

namespace geoclus::io {

using diffcore::Tensor;

// 17 significant digits: doubles round-trip exactly through text.
std::string format_double(double v);

struct CsvHeader {
    std::string kind;
    std::size_t rows = 0;
    std::size_t cols = 0;
    // free-form key=value extras (name, shift, scale, ...)
    std::vector<std::pair<std::string, std::string>> extras;

    std::string get(const std::string& key, const std::string& fallback = {}) const;
};

// Writes `# geoclus kind=<kind> rows=<r> cols=<c> [k=v ...]` then one CSV
// row per matrix row.
void save_csv_matrix(const std::filesystem::path& path, const Tensor& matrix,
                     const CsvHeader& header);

struct CsvFile {
    CsvHeader header;
    Tensor matrix;
};

// Parses a geoclus CSV; also accepts headerless rectangular numeric CSV
// (header.kind left empty). Throws with row/column context on bad cells.
CsvFile load_csv(const std::filesystem::path& path);

// 8-bit binary PGM (P5), min-max normalized; a constant field maps to 128.
void write_pgm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               std::span<const double> values);

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace geoclus::io
