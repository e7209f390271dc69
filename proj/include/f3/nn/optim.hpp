#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "f3/nn/params.hpp"

namespace f3::nn {

enum class OptimizerKind { kSgd, kAdam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename Scalar>
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg = {}) : cfg_(cfg) {}

  const OptimizerConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }

  // Applies the accumulated gradients, zeroes them and bumps the store's
  // step counter. Throws TrainingError (nothing updated) on a non-finite
  // gradient.
  void step(ParameterStore<Scalar>& store) {
    for (std::size_t i = 0; i < store.size(); ++i) {
      if (!store[i].grad.allFinite()) {
        throw TrainingError("non-finite gradient in parameter '" + store[i].name +
                            "' at step " + std::to_string(store.step()));
      }
    }
    if (cfg_.kind == OptimizerKind::kSgd) {
      for (std::size_t i = 0; i < store.size(); ++i) {
        store[i].value -= static_cast<Scalar>(cfg_.lr) * store[i].grad;
      }
    } else {
      if (first_.size() != store.size()) {
        first_.clear();
        second_.clear();
        for (std::size_t i = 0; i < store.size(); ++i) {
          first_.push_back(Matrix<Scalar>::Zero(store[i].value.rows(), store[i].value.cols()));
          second_.push_back(Matrix<Scalar>::Zero(store[i].value.rows(), store[i].value.cols()));
        }
      }
      ++t_;
      const Scalar b1 = static_cast<Scalar>(cfg_.beta1);
      const Scalar b2 = static_cast<Scalar>(cfg_.beta2);
      const Scalar c1 = Scalar(1) - static_cast<Scalar>(std::pow(cfg_.beta1, t_));
      const Scalar c2 = Scalar(1) - static_cast<Scalar>(std::pow(cfg_.beta2, t_));
      const Scalar lr = static_cast<Scalar>(cfg_.lr);
      const Scalar eps = static_cast<Scalar>(cfg_.eps);
      for (std::size_t i = 0; i < store.size(); ++i) {
        auto& p = store[i];
        first_[i] = b1 * first_[i] + (Scalar(1) - b1) * p.grad;
        second_[i] = b2 * second_[i] + (Scalar(1) - b2) * p.grad.cwiseAbs2();
        p.value.array() -= lr * (first_[i].array() / c1) /
                           ((second_[i].array() / c2).sqrt() + eps);
      }
    }
    store.zero_grad();
    store.increment_step();
  }

 private:
  OptimizerConfig cfg_;
  std::vector<Matrix<Scalar>> first_;
  std::vector<Matrix<Scalar>> second_;
  int t_ = 0;
};

template <typename Scalar>
void optimizer_step(ParameterStore<Scalar>& store, Optimizer<Scalar>& opt) {
  opt.step(store);
}

}  // namespace f3::nn
