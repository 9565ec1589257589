#include "geoclus/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "geoclus/io.hpp"
#include "geoclus/rng.hpp"

namespace geoclus::data {

std::vector<double> Dataset::row(std::size_t i) const {
    std::vector<double> out(dim());
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = points.at(i, c);
    return out;
}

int Dataset::class_count() const {
    int top = -1;
    for (int l : labels) top = std::max(top, l);
    return top + 1;
}

void Dataset::validate() const {
    if (points.rank() != 2) throw std::invalid_argument("Dataset: points must be N x D");
    if (labels.size() != points.rows())
        throw std::invalid_argument("Dataset: label count != point count");
    if (!points.all_finite()) throw std::invalid_argument("Dataset: non-finite point");
    for (int l : labels)
        if (l < 0) throw std::invalid_argument("Dataset: negative label");
}

std::array<double, 2> moon_point(int moon, double theta) {
    if (moon == 0) return {std::cos(theta), std::sin(theta)};
    return {1.0 - std::cos(theta), 0.5 - std::sin(theta)};
}

Dataset two_moons(std::size_t n_per_moon, double noise_sd, std::uint64_t seed) {
    if (n_per_moon == 0) throw std::invalid_argument("two_moons: need at least one point per moon");
    if (noise_sd < 0.0) throw std::invalid_argument("two_moons: negative noise");
    Dataset ds;
    ds.name = "two-moons";
    ds.points = Tensor({2 * n_per_moon, 2});
    ds.labels.resize(2 * n_per_moon);
    Rng rng(seed);
    for (int moon = 0; moon < 2; ++moon) {
        for (std::size_t i = 0; i < n_per_moon; ++i) {
            double theta = rng.uniform(0.0, M_PI);
            auto p = moon_point(moon, theta);
            std::size_t r = moon * n_per_moon + i;
            ds.points.at(r, 0) = p[0] + noise_sd * rng.normal();
            ds.points.at(r, 1) = p[1] + noise_sd * rng.normal();
            ds.labels[r] = moon;
        }
    }
    return ds;
}

Dataset aniso_blobs(std::size_t n_total, std::uint64_t seed) {
    if (n_total < 3) throw std::invalid_argument("aniso_blobs: need at least 3 points");
    Dataset ds;
    ds.name = "aniso";
    ds.points = Tensor({n_total, 2});
    ds.labels.resize(n_total);
    Rng rng(seed);
    std::size_t counts[3];
    counts[0] = (n_total + 2) / 3;
    counts[1] = (n_total + 1) / 3;
    counts[2] = n_total / 3;
    std::size_t r = 0;
    for (int k = 0; k < 3; ++k) {
        for (std::size_t i = 0; i < counts[k]; ++i, ++r) {
            double gx = kAnisoCenters[k][0] + rng.normal();
            double gy = kAnisoCenters[k][1] + rng.normal();
            ds.points.at(r, 0) = gx * kAnisoShear[0] + gy * kAnisoShear[2];
            ds.points.at(r, 1) = gx * kAnisoShear[1] + gy * kAnisoShear[3];
            ds.labels[r] = k;
        }
    }
    return ds;
}

namespace {

std::uint32_t read_be32(std::istream& in, const std::filesystem::path& path, std::size_t offset) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw std::runtime_error("truncated IDX file " + path.string() + " at offset " +
                                 std::to_string(offset));
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
           std::uint32_t(b[3]);
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path, const std::set<int>& class_filter,
                 std::size_t per_class_limit) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw std::runtime_error("cannot open IDX images: " + images_path.string());
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw std::runtime_error("cannot open IDX labels: " + labels_path.string());

    std::uint32_t img_magic = read_be32(img, images_path, 0);
    if (img_magic != 0x00000803u)
        throw std::runtime_error("bad IDX image magic at offset 0 in " + images_path.string() +
                                 " (got 0x" + [&] {
                                     std::ostringstream os;
                                     os << std::hex << img_magic;
                                     return os.str();
                                 }() + ", want 0x803)");
    std::uint32_t n_images = read_be32(img, images_path, 4);
    std::uint32_t height = read_be32(img, images_path, 8);
    std::uint32_t width = read_be32(img, images_path, 12);

    std::uint32_t lab_magic = read_be32(lab, labels_path, 0);
    if (lab_magic != 0x00000801u)
        throw std::runtime_error("bad IDX label magic at offset 0 in " + labels_path.string());
    std::uint32_t n_labels = read_be32(lab, labels_path, 4);
    if (n_images != n_labels)
        throw std::runtime_error("IDX image/label count mismatch: " + std::to_string(n_images) +
                                 " images vs " + std::to_string(n_labels) + " labels");

    std::size_t pixels = static_cast<std::size_t>(width) * height;
    std::vector<unsigned char> img_buf(pixels);
    std::vector<double> rows;
    std::vector<int> labels;
    std::map<int, std::size_t> taken;

    for (std::uint32_t i = 0; i < n_images; ++i) {
        if (!img.read(reinterpret_cast<char*>(img_buf.data()), static_cast<std::streamsize>(pixels)))
            throw std::runtime_error("truncated IDX file " + images_path.string() + " at offset " +
                                     std::to_string(16 + std::size_t(i) * pixels));
        char lbl_byte;
        if (!lab.get(lbl_byte))
            throw std::runtime_error("truncated IDX file " + labels_path.string() + " at offset " +
                                     std::to_string(8 + std::size_t(i)));
        int label = static_cast<unsigned char>(lbl_byte);
        if (!class_filter.empty() && !class_filter.count(label)) continue;
        if (per_class_limit > 0 && taken[label] >= per_class_limit) continue;
        ++taken[label];
        for (unsigned char px : img_buf) rows.push_back(px / 255.0);
        labels.push_back(label);
    }

    Dataset ds;
    ds.name = "idx";
    if (labels.empty()) throw std::runtime_error("IDX load produced no rows (filter too strict?)");
    ds.points = Tensor::matrix(labels.size(), pixels, std::move(rows));
    // compact labels to [0, k) preserving numeric order
    std::map<int, int> remap;
    for (int l : labels) remap.emplace(l, 0);
    int next = 0;
    for (auto& [k, v] : remap) v = next++;
    ds.labels.reserve(labels.size());
    for (int l : labels) ds.labels.push_back(remap[l]);
    ds.normalization.shift.assign(pixels, 0.0);
    ds.normalization.scale.assign(pixels, 1.0 / 255.0);
    return ds;
}

namespace {

std::string join_doubles(const std::vector<double>& v) {
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ";" : "") << io::format_double(v[i]);
    return os.str();
}

std::vector<double> split_doubles(const std::string& s) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= s.size() && !s.empty()) {
        std::size_t semi = s.find(';', pos);
        out.push_back(std::stod(s.substr(pos, semi == std::string::npos ? std::string::npos
                                                                        : semi - pos)));
        if (semi == std::string::npos) break;
        pos = semi + 1;
    }
    return out;
}

}  // namespace

void save_csv(const std::filesystem::path& path, const Dataset& dataset) {
    dataset.validate();
    Tensor with_labels({dataset.size(), dataset.dim() + 1});
    for (std::size_t r = 0; r < dataset.size(); ++r) {
        for (std::size_t c = 0; c < dataset.dim(); ++c) with_labels.at(r, c) = dataset.points.at(r, c);
        with_labels.at(r, dataset.dim()) = dataset.labels[r];
    }
    io::CsvHeader h;
    h.kind = "dataset";
    h.extras.emplace_back("name", dataset.name.empty() ? "unnamed" : dataset.name);
    if (!dataset.normalization.identity()) {
        h.extras.emplace_back("shift", join_doubles(dataset.normalization.shift));
        h.extras.emplace_back("scale", join_doubles(dataset.normalization.scale));
    }
    io::save_csv_matrix(path, with_labels, h);
}

void save_csv(const std::filesystem::path& path, const Tensor& matrix) {
    io::CsvHeader h;
    h.kind = "matrix";
    io::save_csv_matrix(path, matrix, h);
}

Dataset load_dataset_csv(const std::filesystem::path& path) {
    io::CsvFile file = io::load_csv(path);
    if (file.header.kind != "dataset")
        throw std::runtime_error("expected a dataset CSV: " + path.string());
    std::size_t cols = file.matrix.cols();
    if (cols < 2) throw std::runtime_error("dataset CSV too narrow: " + path.string());
    Dataset ds;
    ds.name = file.header.get("name");
    ds.points = Tensor({file.matrix.rows(), cols - 1});
    ds.labels.resize(file.matrix.rows());
    for (std::size_t r = 0; r < file.matrix.rows(); ++r) {
        for (std::size_t c = 0; c + 1 < cols; ++c) ds.points.at(r, c) = file.matrix.at(r, c);
        ds.labels[r] = static_cast<int>(std::lround(file.matrix.at(r, cols - 1)));
    }
    std::string shift = file.header.get("shift");
    std::string scale = file.header.get("scale");
    if (!shift.empty()) ds.normalization.shift = split_doubles(shift);
    if (!scale.empty()) ds.normalization.scale = split_doubles(scale);
    ds.validate();
    return ds;
}

Tensor load_matrix_csv(const std::filesystem::path& path) {
    io::CsvFile file = io::load_csv(path);
    if (!file.header.kind.empty() && file.header.kind != "matrix" &&
        file.header.kind != "distance")
        throw std::runtime_error("expected a matrix CSV, found kind=" + file.header.kind + ": " +
                                 path.string());
    return std::move(file.matrix);
}

}  // namespace geoclus::data
