#pragma once

// Parameter registry, initializers, and small layer helpers.

#include "radiant/tensor.hpp"

#include <map>
#include <random>

namespace radiant {

// Named trainable parameters, registered in creation order so optimizer
// traversal (and therefore accumulation) is deterministic.
template <class S>
class ParamStore {
 public:
  Tensor<S> create(const std::string& name, Shape shape, ArrayX<S> values) {
    auto t = Tensor<S>::leaf(std::move(shape), std::move(values), true);
    t.set_name(name);
    if (index_.count(name)) op_error("params", "duplicate parameter name " + name);
    index_[name] = params_.size();
    params_.push_back(t);
    return t;
  }

  Tensor<S> get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) op_error("params", "unknown parameter " + name);
    return params_[it->second];
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }
  const std::vector<Tensor<S>>& all() const { return params_; }
  size_t size() const { return params_.size(); }

  void zero_grads() {
    for (auto& p : params_) p.clear_grad();
  }

 private:
  std::vector<Tensor<S>> params_;
  std::map<std::string, size_t> index_;
};

template <class S>
ArrayX<S> normal_init(Eigen::Index n, S stddev, std::mt19937& rng) {
  std::normal_distribution<double> dist(0.0, double(stddev));
  ArrayX<S> v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = S(dist(rng));
  return v;
}

// He-style fan-in scaling for relu layers.
template <class S>
ArrayX<S> kaiming_init(Eigen::Index n, Eigen::Index fan_in, std::mt19937& rng) {
  return normal_init<S>(n, S(std::sqrt(2.0 / double(fan_in))), rng);
}

template <class S>
struct Linear {
  Tensor<S> weight;  // [in, out]
  Tensor<S> bias;    // [1, out]

  static Linear create(ParamStore<S>& ps, const std::string& name, Eigen::Index in,
                       Eigen::Index out, std::mt19937& rng, S weight_scale = S(0)) {
    Linear l;
    ArrayX<S> w = weight_scale > S(0) ? normal_init<S>(in * out, weight_scale, rng)
                                      : kaiming_init<S>(in * out, in, rng);
    l.weight = ps.create(name + "/w", {in, out}, std::move(w));
    l.bias = ps.create(name + "/b", {1, out}, ArrayX<S>::Zero(out));
    return l;
  }

  // x [N, in] -> [N, out]
  Tensor<S> operator()(Tensor<S> x) const { return add(matmul(x, weight), bias); }
};

}  // namespace radiant
