#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace geoclus::diffcore {

// Dense row-major tensor of 64-bit reals. Rank 1 and 2 cover everything
// in this project; higher ranks are accepted but nothing constructs them.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
    Tensor(std::vector<std::size_t> shape, std::vector<double> values);

    static Tensor scalar(double v);
    static Tensor vec(std::vector<double> v);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    // rank-2 accessors
    std::size_t rows() const;
    std::size_t cols() const;
    double& at(std::size_t r, std::size_t c);
    double at(std::size_t r, std::size_t c) const;

    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }
    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool is_scalar() const { return size() == 1; }
    bool all_finite() const;

    void fill(double v);
    void set_values(std::span<const double> v);  // size must match

    std::string shape_str() const;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> values_;
};

// Throws std::runtime_error naming `what` if any entry is NaN/Inf.
void require_finite(const Tensor& t, const char* what);
void require_finite(std::span<const double> v, const char* what);

}  // namespace geoclus::diffcore
