#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "f3/errors.hpp"
#include "f3/rng.hpp"

namespace f3::nn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
struct Param {
  std::string name;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;
};

// Named weights with same-shape gradient buffers. Param addresses are stable
// for the lifetime of the store (layers keep pointers into it).
template <typename Scalar>
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;
  ParameterStore(ParameterStore&&) noexcept = default;
  ParameterStore& operator=(ParameterStore&&) noexcept = default;

  Param<Scalar>& add(std::string name, Eigen::Index rows, Eigen::Index cols) {
    if (find(name)) throw ConfigError("duplicate parameter '" + name + "'");
    auto p = std::make_unique<Param<Scalar>>();
    p->name = std::move(name);
    p->value = Matrix<Scalar>::Zero(rows, cols);
    p->grad = Matrix<Scalar>::Zero(rows, cols);
    params_.push_back(std::move(p));
    return *params_.back();
  }

  Param<Scalar>* find(const std::string& name) {
    for (auto& p : params_)
      if (p->name == name) return p.get();
    return nullptr;
  }
  const Param<Scalar>* find(const std::string& name) const {
    for (const auto& p : params_)
      if (p->name == name) return p.get();
    return nullptr;
  }
  Param<Scalar>& at(const std::string& name) {
    auto* p = find(name);
    if (!p) throw ConfigError("no parameter '" + name + "'");
    return *p;
  }

  std::size_t size() const { return params_.size(); }
  Param<Scalar>& operator[](std::size_t i) { return *params_[i]; }
  const Param<Scalar>& operator[](std::size_t i) const { return *params_[i]; }

  std::uint64_t step() const { return step_; }
  void set_step(std::uint64_t s) { step_ = s; }
  void increment_step() { ++step_; }

  void zero_grad() {
    for (auto& p : params_) p->grad.setZero();
  }

  // Uniform in [-range, range], parameters filled in insertion order.
  void init_uniform(Rng& rng, Scalar range) {
    for (auto& p : params_) {
      for (Eigen::Index i = 0; i < p->value.size(); ++i) {
        p->value.data()[i] =
            static_cast<Scalar>((2.0 * uniform01(rng) - 1.0) * range);
      }
    }
  }

  bool all_finite() const {
    for (const auto& p : params_)
      if (!p->value.allFinite()) return false;
    return true;
  }

  std::size_t num_scalars() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
    return n;
  }

  // Copies values from a store with the same names and shapes.
  void copy_values_from(const ParameterStore& other) {
    if (other.size() != size()) throw ShapeError("copy_values_from: size");
    for (std::size_t i = 0; i < size(); ++i) {
      auto& dst = *params_[i];
      const auto& src = other[i];
      if (dst.name != src.name || dst.value.rows() != src.value.rows() ||
          dst.value.cols() != src.value.cols()) {
        throw ShapeError("copy_values_from: mismatch at " + dst.name);
      }
      dst.value = src.value;
    }
  }

 private:
  std::vector<std::unique_ptr<Param<Scalar>>> params_;
  std::uint64_t step_ = 0;
};

}  // namespace f3::nn
