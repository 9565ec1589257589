#include "geoclus/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace geoclus::diffcore {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t s : shape) {
        if (s == 0) throw std::invalid_argument("Tensor: zero dimension in shape");
        n *= s;
    }
    return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), values_(shape_product(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
    if (shape_product(shape_) != values_.size())
        throw std::invalid_argument("Tensor: shape/value count mismatch");
}

Tensor Tensor::scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

Tensor Tensor::vec(std::vector<double> v) {
    std::size_t n = v.size();
    return Tensor({n}, std::move(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    return Tensor({rows, cols}, std::move(values));
}

std::size_t Tensor::rows() const {
    if (rank() != 2) throw std::logic_error("Tensor::rows: not rank-2, shape " + shape_str());
    return shape_[0];
}

std::size_t Tensor::cols() const {
    if (rank() != 2) throw std::logic_error("Tensor::cols: not rank-2, shape " + shape_str());
    return shape_[1];
}

double& Tensor::at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
double Tensor::at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

bool Tensor::all_finite() const {
    for (double v : values_)
        if (!std::isfinite(v)) return false;
    return true;
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

void Tensor::set_values(std::span<const double> v) {
    if (v.size() != values_.size())
        throw std::invalid_argument("Tensor::set_values: size mismatch");
    std::copy(v.begin(), v.end(), values_.begin());
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "x" : "") << shape_[i];
    os << "]";
    return os.str();
}

void require_finite(std::span<const double> v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x))
            throw std::runtime_error(std::string("non-finite value in ") + what);
}

void require_finite(const Tensor& t, const char* what) { require_finite(t.values(), what); }

}  // namespace geoclus::diffcore
