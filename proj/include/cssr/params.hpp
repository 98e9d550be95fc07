#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "cssr/rng.hpp"
#include "cssr/tensor.hpp"

namespace cssr {

// A trainable tensor. Gradient is accumulated by Tape::backward and consumed
// by the optimizer; callers are responsible for zeroing between steps.
template <typename S>
struct Parameter {
  std::string name;
  Tensor<S> value;
  Tensor<S> grad;

  void zero_grad() {
    grad = Tensor<S>(value.shape);
  }
};

// Owns the parameters of one network in creation order. Creation order is
// deterministic (networks build their layers in a fixed sequence), which
// makes it the canonical order for optimizer state and checkpoint layout.
template <typename S>
class ParamStore {
 public:
  // Weight entries are initialized uniform on +-sqrt(1/fan_in); bias entries
  // start at zero (pass fan_in = 0 to get a zero-initialized tensor).
  Parameter<S>& create(const std::string& name, Shape shape, int fan_in, Rng& rng) {
    if (find(name) != nullptr)
      throw ConfigError("parameter '" + name + "' already exists in this store");
    auto p = std::make_unique<Parameter<S>>();
    p->name = name;
    p->value = Tensor<S>(shape);
    p->grad = Tensor<S>(shape);
    if (fan_in > 0) {
      const double bound = std::sqrt(1.0 / fan_in);
      for (auto& v : p->value.data) v = static_cast<S>(rng.uniform(-bound, bound));
    }
    params_.push_back(std::move(p));
    return *params_.back();
  }

  size_t size() const { return params_.size(); }
  Parameter<S>& operator[](size_t i) { return *params_[i]; }
  const Parameter<S>& operator[](size_t i) const { return *params_[i]; }

  Parameter<S>* find(const std::string& name) {
    for (auto& p : params_)
      if (p->name == name) return p.get();
    return nullptr;
  }

  void zero_grads() {
    for (auto& p : params_) p->zero_grad();
  }

  long long total_parameters() const {
    long long total = 0;
    for (auto& p : params_) total += p->value.shape.numel();
    return total;
  }

  // Parameter totals grouped by block: "durb.3.cm.w" -> "durb.3",
  // "head.w" -> "head". Order follows first appearance.
  std::vector<std::pair<std::string, long long>> breakdown() const {
    std::vector<std::pair<std::string, long long>> rows;
    for (const auto& p : params_) {
      std::string key = block_key(p->name);
      auto it = std::find_if(rows.begin(), rows.end(),
                             [&](const auto& r) { return r.first == key; });
      if (it == rows.end())
        rows.emplace_back(key, p->value.shape.numel());
      else
        it->second += p->value.shape.numel();
    }
    return rows;
  }

  static std::string block_key(const std::string& name) {
    size_t first = name.find('.');
    if (first == std::string::npos) return name;
    size_t second = name.find('.', first + 1);
    std::string seg1 = name.substr(first + 1, second == std::string::npos
                                                  ? std::string::npos
                                                  : second - first - 1);
    bool numeric = !seg1.empty();
    for (char ch : seg1) numeric = numeric && ch >= '0' && ch <= '9';
    if (numeric && second != std::string::npos) return name.substr(0, second);
    return name.substr(0, first);
  }

 private:
  // unique_ptr elements keep Parameter addresses stable across creation, so
  // layers can hold raw pointers to their weights.
  std::vector<std::unique_ptr<Parameter<S>>> params_;
};

}  // namespace cssr
