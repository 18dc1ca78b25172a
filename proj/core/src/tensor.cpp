#include "camreid/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace camreid {

std::string Shape::str() const {
  std::ostringstream os;
  os << "(" << n << "," << c << "," << h << "," << w << ")";
  return os.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(shape), data_(shape.numel(), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.numel()) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_.str());
  }
}

double Tensor::item() const {
  if (!shape_.is_scalar()) {
    throw ShapeError("item() requires shape (1,1,1,1), got " + shape_.str());
  }
  return data_[0];
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape.numel() != shape_.numel()) {
    throw ShapeError("cannot reshape " + shape_.str() + " to " + shape.str());
  }
  return Tensor(shape, data_);
}

void write_tensor(std::ostream& os, const Tensor& t) {
  const Shape& s = t.shape();
  os << s.n << ' ' << s.c << ' ' << s.h << ' ' << s.w << '\n';
  const auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
  for (std::size_t i = 0; i < t.size(); ++i) {
    os << t[i] << (i + 1 == t.size() ? '\n' : ' ');
  }
  os.precision(old_precision);
}

Tensor read_tensor(std::istream& is) {
  Shape s;
  if (!(is >> s.n >> s.c >> s.h >> s.w)) {
    throw std::runtime_error("tensor fixture: expected header 'N C H W'");
  }
  std::vector<double> data(s.numel());
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!(is >> data[i])) {
      throw std::runtime_error("tensor fixture: expected " +
                               std::to_string(data.size()) + " values, read " +
                               std::to_string(i));
    }
  }
  return Tensor(s, std::move(data));
}

}  // namespace camreid
