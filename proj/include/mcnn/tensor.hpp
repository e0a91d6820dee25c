#ifndef MCNN_TENSOR_HPP_
#define MCNN_TENSOR_HPP_

#include <cstdint>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "mcnn/common.hpp"

namespace mcnn {

// A sequence of positions x channels flowing through the convolution stack.
// Row-major storage; live[p] == false marks a padding slot whose row is
// identically zero.
template <typename T>
struct FeatureMap {
  int positions = 0;
  int channels = 0;
  std::vector<T> values;
  std::vector<std::uint8_t> live;

  FeatureMap() = default;
  FeatureMap(int p, int c)
      : positions(p),
        channels(c),
        values(static_cast<std::size_t>(p) * c, T(0)),
        live(p, 1) {}

  T& at(int pos, int ch) { return values[static_cast<std::size_t>(pos) * channels + ch]; }
  const T& at(int pos, int ch) const {
    return values[static_cast<std::size_t>(pos) * channels + ch];
  }
  T* row(int pos) { return values.data() + static_cast<std::size_t>(pos) * channels; }
  const T* row(int pos) const {
    return values.data() + static_cast<std::size_t>(pos) * channels;
  }

  bool invariants_hold() const {
    if (values.size() != static_cast<std::size_t>(positions) * channels) return false;
    if (live.size() != static_cast<std::size_t>(positions)) return false;
    for (int p = 0; p < positions; ++p) {
      if (live[p]) continue;
      for (int c = 0; c < channels; ++c) {
        if (at(p, c) != T(0)) return false;
      }
    }
    return true;
  }
};

// One named trainable (or frozen) array plus its gradient buffer.
template <typename T>
struct ParamArray {
  std::string name;
  std::vector<int> shape;
  std::vector<T> values;
  std::vector<T> grad;
  bool trainable = true;

  ParamArray() = default;
  ParamArray(std::string n, std::vector<int> s, bool train = true)
      : name(std::move(n)), shape(std::move(s)), trainable(train) {
    std::size_t total = 1;
    for (int d : shape) total *= static_cast<std::size_t>(d);
    values.assign(total, T(0));
    grad.assign(total, T(0));
  }

  std::size_t size() const { return values.size(); }
  int rows() const { return shape.empty() ? 0 : shape[0]; }
  int cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  T& at(int r, int c) { return values[static_cast<std::size_t>(r) * cols() + c]; }
  const T& at(int r, int c) const {
    return values[static_cast<std::size_t>(r) * cols() + c];
  }

  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

// Ordered, uniquely named collection of ParamArrays. Insertion order is the
// canonical order for checkpoints and SGD sweeps.
template <typename T>
struct ParamSet {
  std::vector<std::unique_ptr<ParamArray<T>>> arrays;
  std::unordered_map<std::string, std::size_t> index;

  ParamArray<T>& add(const std::string& name, std::vector<int> shape, bool trainable = true) {
    if (index.count(name) != 0) {
      throw UsageError("duplicate parameter name: " + name);
    }
    arrays.push_back(std::make_unique<ParamArray<T>>(name, std::move(shape), trainable));
    index[name] = arrays.size() - 1;
    return *arrays.back();
  }

  ParamArray<T>& get(const std::string& name) {
    auto it = index.find(name);
    if (it == index.end()) throw UsageError("unknown parameter: " + name);
    return *arrays[it->second];
  }
  const ParamArray<T>& get(const std::string& name) const {
    auto it = index.find(name);
    if (it == index.end()) throw UsageError("unknown parameter: " + name);
    return *arrays[it->second];
  }
  bool has(const std::string& name) const { return index.count(name) != 0; }

  void zero_grad() {
    for (auto& a : arrays) a->zero_grad();
  }
};

struct GradCheckResult {
  std::string param_name;
  double max_rel_error = 0.0;
  bool passed = false;
};

}  // namespace mcnn

#endif  // MCNN_TENSOR_HPP_
