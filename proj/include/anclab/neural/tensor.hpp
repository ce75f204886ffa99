// Dense row-major tensors and the flat parameter store shared by the
// layers, optimizer, checkpoint io and gradient checker.
#ifndef ANCLAB_NEURAL_TENSOR_HPP
#define ANCLAB_NEURAL_TENSOR_HPP

#include <numeric>
#include <string>
#include <vector>

#include "anclab/common.hpp"

namespace anclab::nn {

template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(count(shape), T(0));
  }

  static std::size_t count(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int d : s) n *= static_cast<std::size_t>(d);
    return n;
  }
  std::size_t size() const { return data.size(); }

  // C x H x W accessor
  T& at(int c, int h, int w) {
    return data[(static_cast<std::size_t>(c) * shape[1] + h) * shape[2] + w];
  }
  T at(int c, int h, int w) const {
    return data[(static_cast<std::size_t>(c) * shape[1] + h) * shape[2] + w];
  }
  // T x D accessor
  T& at(int t, int d) { return data[static_cast<std::size_t>(t) * shape[1] + d]; }
  T at(int t, int d) const { return data[static_cast<std::size_t>(t) * shape[1] + d]; }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

// All learnable parameters live in one flat vector; layers hold offsets.
// Gradients are accumulated into caller-provided flat buffers of the same
// layout, which keeps batch reduction order explicit.
template <typename T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    std::vector<int> shape;
    std::size_t offset = 0;
    std::size_t count = 0;
  };

  std::size_t add(const std::string& name, std::vector<int> shape) {
    Entry e;
    e.name = name;
    e.count = Tensor<T>::count(shape);
    e.shape = std::move(shape);
    e.offset = values_.size();
    values_.resize(values_.size() + e.count, T(0));
    entries_.push_back(e);
    return entries_.size() - 1;
  }

  const std::vector<Entry>& entries() const { return entries_; }
  const Entry& entry(std::size_t i) const { return entries_[i]; }

  std::size_t total() const { return values_.size(); }
  T* data() { return values_.data(); }
  const T* data() const { return values_.data(); }
  std::vector<T>& values() { return values_; }
  const std::vector<T>& values() const { return values_; }

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const Entry& e : entries_) out.add(e.name, e.shape);
    for (std::size_t i = 0; i < values_.size(); ++i)
      out.data()[i] = static_cast<U>(values_[i]);
    return out;
  }

 private:
  std::vector<Entry> entries_;
  std::vector<T> values_;
};

}  // namespace anclab::nn

#endif  // ANCLAB_NEURAL_TENSOR_HPP
