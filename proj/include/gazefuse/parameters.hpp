#pragma once

#include <string>
#include <utility>
#include <vector>

#include "gazefuse/errors.hpp"
#include "gazefuse/rng.hpp"
#include "gazefuse/tensor.hpp"

namespace gazefuse {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Ordered collection of named parameter handles. Order is the
/// registration order, which fixes checkpoint layout and optimizer state.
class ParameterSet {
 public:
  void add(std::string name, Tensor t) { items_.push_back({std::move(name), std::move(t)}); }

  void append(const ParameterSet& other) {
    items_.insert(items_.end(), other.items_.begin(), other.items_.end());
  }

  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }
  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  const NamedTensor& operator[](std::size_t i) const { return items_[i]; }
  NamedTensor& operator[](std::size_t i) { return items_[i]; }

  const Tensor* find(const std::string& name) const {
    for (const auto& it : items_) {
      if (it.name == name) return &it.tensor;
    }
    return nullptr;
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& it : items_) n += it.tensor.size();
    return n;
  }

  void zero_grad() {
    for (auto& it : items_) it.tensor.zero_grad();
  }

  /// Deep copy of current values (used to retain the best checkpoint).
  std::vector<std::vector<double>> snapshot() const {
    std::vector<std::vector<double>> out;
    out.reserve(items_.size());
    for (const auto& it : items_) out.push_back(it.tensor.to_vector());
    return out;
  }

  void restore(const std::vector<std::vector<double>>& values) {
    if (values.size() != items_.size()) throw UsageError("restore: parameter count mismatch");
    for (std::size_t i = 0; i < items_.size(); ++i) {
      auto dst = items_[i].tensor.mutable_data();
      if (dst.size() != values[i].size()) throw UsageError("restore: size mismatch for " + items_[i].name);
      std::copy(values[i].begin(), values[i].end(), dst.begin());
    }
  }

 private:
  std::vector<NamedTensor> items_;
};

namespace init {

inline Tensor gaussian(Shape shape, double stddev, Rng& rng) {
  const auto n = shape_size(shape);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal(0.0, stddev);
  return Tensor::from(std::move(shape), std::move(v), true);
}

inline Tensor zeros(Shape shape) { return Tensor::zeros(std::move(shape), true); }
inline Tensor ones(Shape shape) { return Tensor::full(std::move(shape), 1.0, true); }

}  // namespace init

}  // namespace gazefuse
