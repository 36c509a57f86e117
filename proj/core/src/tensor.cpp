#include "sfkit/tensor.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace sfkit {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

}  // namespace

const char* precision_name(Precision p) {
  return p == Precision::Single ? "single" : "double";
}

Precision precision_from_name(const std::string& name) {
  if (name == "single") return Precision::Single;
  if (name == "double") return Precision::Double;
  throw InputError("unknown precision '" + name + "' (expected single|double)");
}

Tensor::Tensor(std::vector<std::size_t> shape, Precision precision)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0), precision_(precision) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data, Precision precision)
    : shape_(std::move(shape)), data_(std::move(data)), precision_(precision) {
  if (shape_product(shape_) != data_.size()) {
    throw InputError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape product " + std::to_string(shape_product(shape_)));
  }
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  std::size_t nrow = rows.size();
  std::size_t ncol = nrow == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(nrow * ncol);
  for (const auto& row : rows) {
    if (row.size() != ncol) throw InputError("matrix rows have unequal lengths");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({nrow, ncol}, std::move(data));
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

double& Tensor::at(std::size_t row, std::size_t col) {
  if (rank() != 2 || row >= shape_[0] || col >= shape_[1]) {
    throw InputError("tensor.at(" + std::to_string(row) + "," + std::to_string(col) +
                     ") out of range");
  }
  return data_[row * shape_[1] + col];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  return const_cast<Tensor*>(this)->at(row, col);
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::check_finite(const std::string& context) const {
  if (!all_finite()) throw InvariantError("non-finite value in " + context);
}

Tensor affine_apply(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.rank() != 2 || weight.rank() != 2 || bias.rank() != 1) {
    throw InputError("affine_apply expects x[N,Cin], weight[Cin,Cout], bias[Cout]");
  }
  const std::size_t n = x.extent(0), cin = x.extent(1);
  const std::size_t cout = weight.extent(1);
  if (weight.extent(0) != cin) {
    throw InputError("affine_apply: weight rows " + std::to_string(weight.extent(0)) +
                     " != input columns " + std::to_string(cin));
  }
  if (bias.extent(0) != cout) {
    throw InputError("affine_apply: bias length " + std::to_string(bias.extent(0)) +
                     " != weight columns " + std::to_string(cout));
  }
  Tensor out({n, cout}, x.precision());
  const double* xd = x.data();
  const double* wd = weight.data();
  const double* bd = bias.data();
  double* od = out.data();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < cout; ++j) od[r * cout + j] = bd[j];
    for (std::size_t i = 0; i < cin; ++i) {
      const double xv = xd[r * cin + i];
      const double* wrow = wd + i * cout;
      for (std::size_t j = 0; j < cout; ++j) od[r * cout + j] += xv * wrow[j];
    }
  }
  out.check_finite("affine_apply");
  return out;
}

double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double silu(double x) { return x * sigmoid(x); }

Tensor activation(const Tensor& x, Activation kind) {
  Tensor out = x;
  switch (kind) {
    case Activation::Softplus:
      for (double& v : out.values()) v = softplus(v);
      break;
    case Activation::Silu:
      for (double& v : out.values()) v = silu(v);
      break;
    case Activation::Identity:
      break;
  }
  out.check_finite("activation");
  return out;
}

namespace {

constexpr char kMagic[4] = {'S', 'F', 'K', 'T'};
constexpr std::uint8_t kVersion = 1;

void write_u64_le(std::ostream& os, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64_le(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

void write_tensor(std::ostream& os, const Tensor& t) {
  os.write(kMagic, 4);
  os.put(static_cast<char>(kVersion));
  os.put(static_cast<char>(t.precision()));
  os.put(static_cast<char>(t.rank()));
  for (std::size_t e : t.shape()) write_u64_le(os, e);
  if (t.precision() == Precision::Single) {
    for (double v : t.values()) {
      float f = static_cast<float>(v);
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      unsigned char buf[4];
      for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
      os.write(reinterpret_cast<const char*>(buf), 4);
    }
  } else {
    for (double v : t.values()) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, 8);
      write_u64_le(os, bits);
    }
  }
}

Tensor read_tensor(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) throw InputError("bad tensor magic (want SFKT)");
  const int version = is.get();
  if (version != kVersion) throw InputError("unsupported tensor version " + std::to_string(version));
  const int prec_byte = is.get();
  if (prec_byte != 1 && prec_byte != 2) throw InputError("bad tensor precision byte");
  const Precision prec = static_cast<Precision>(prec_byte);
  const int rank = is.get();
  if (rank < 0 || rank > 8) throw InputError("bad tensor rank");
  std::vector<std::size_t> shape(static_cast<std::size_t>(rank));
  for (auto& e : shape) e = static_cast<std::size_t>(read_u64_le(is));
  std::size_t count = shape_product(shape);
  std::vector<double> data(count);
  if (prec == Precision::Single) {
    for (std::size_t i = 0; i < count; ++i) {
      unsigned char buf[4];
      is.read(reinterpret_cast<char*>(buf), 4);
      std::uint32_t bits = 0;
      for (int k = 0; k < 4; ++k) bits |= static_cast<std::uint32_t>(buf[k]) << (8 * k);
      float f;
      std::memcpy(&f, &bits, 4);
      data[i] = static_cast<double>(f);
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      std::uint64_t bits = read_u64_le(is);
      double v;
      std::memcpy(&v, &bits, 8);
      data[i] = v;
    }
  }
  if (!is) throw InputError("truncated tensor file");
  return Tensor(std::move(shape), std::move(data), prec);
}

void save_tensor(const std::string& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot open '" + path + "' for writing");
  write_tensor(os, t);
}

Tensor load_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open '" + path + "' for reading");
  return read_tensor(is);
}

}  // namespace sfkit
