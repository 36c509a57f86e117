#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <iosfwd>
#include <string>
#include <vector>

#include "sfkit/errors.hpp"

namespace sfkit {

/// Storage width used for arithmetic and binary serialization.
enum class Precision : std::uint8_t { Single = 1, Double = 2 };

const char* precision_name(Precision p);
Precision precision_from_name(const std::string& name);

/// Dense row-major tensor. Values are held as doubles; the precision tag
/// selects the width of serialized values and of compute paths that honor it.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<std::size_t> shape, Precision precision = Precision::Double);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data,
         Precision precision = Precision::Double);

  /// 1-D tensor from a value list.
  static Tensor vector(std::initializer_list<double> values);
  /// 2-D tensor from nested lists; all rows must have equal length.
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double value);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  Precision precision() const { return precision_; }
  void set_precision(Precision p) { precision_ = p; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  /// 2-D element access, bounds-checked.
  double& at(std::size_t row, std::size_t col);
  double at(std::size_t row, std::size_t col) const;

  bool all_finite() const;
  /// Throws InvariantError if any value is NaN or Inf.
  void check_finite(const std::string& context) const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
  Precision precision_ = Precision::Double;
};

/// out[n,j] = sum_i x[n,i] * weight[i,j] + bias[j]
Tensor affine_apply(const Tensor& x, const Tensor& weight, const Tensor& bias);

enum class Activation { Softplus, Silu, Identity };

/// Overflow-safe softplus: max(x,0) + log1p(exp(-|x|)).
double softplus(double x);
double sigmoid(double x);
double silu(double x);

Tensor activation(const Tensor& x, Activation kind);

/// Binary container: magic "SFKT", version byte, precision byte, rank byte,
/// little-endian u64 extents, then raw little-endian values (f32 or f64 per
/// the precision byte).
void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);
void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

}  // namespace sfkit
