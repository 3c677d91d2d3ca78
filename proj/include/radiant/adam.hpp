#pragma once

// Adam with bias correction and continuous exponential learning-rate decay.

#include "radiant/nn.hpp"

namespace radiant {

struct AdamConfig {
  double base_lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double decay_factor = 0.1;     // lr multiplier applied every decay_interval steps
  double decay_interval = 1e5;   // applied continuously: lr = base * factor^(step/interval)
};

template <class S>
class Adam {
 public:
  // lr_override maps a parameter-name prefix to a base learning rate
  // (longest matching prefix wins; empty map uses cfg.base_lr everywhere).
  Adam(std::vector<Tensor<S>> params, AdamConfig cfg,
       std::map<std::string, double> lr_override = {})
      : params_(std::move(params)), cfg_(cfg), lr_override_(std::move(lr_override)) {
    for (auto& p : params_) {
      moments1_.push_back(ArrayX<S>::Zero(p.numel()));
      moments2_.push_back(ArrayX<S>::Zero(p.numel()));
    }
  }

  int64_t step_count() const { return step_; }

  double effective_lr(double base) const {
    return base * std::pow(cfg_.decay_factor, double(step_) / cfg_.decay_interval);
  }

  void step() {
    ++step_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, double(step_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, double(step_));
    for (size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i];
      if (!p.has_grad()) continue;  // detached leaf: no update
      auto& g = p.grad();
      if (!g.isFinite().all())
        throw std::runtime_error("adam: non-finite gradient for parameter '" +
                                 (p.name().empty() ? std::string("<unnamed>") : p.name()) + "'");
      double lr = effective_lr(base_lr_for(p.name()));
      auto& m1 = moments1_[i];
      auto& m2 = moments2_[i];
      m1 = S(cfg_.beta1) * m1 + S(1.0 - cfg_.beta1) * g;
      m2 = S(cfg_.beta2) * m2 + S(1.0 - cfg_.beta2) * g * g;
      ArrayX<S> mhat = m1 / S(bc1);
      ArrayX<S> vhat = m2 / S(bc2);
      p.value() -= S(lr) * mhat / (vhat.sqrt() + S(cfg_.eps));
    }
  }

  // Checkpoint access: per-parameter moment estimates plus the step counter.
  std::vector<Tensor<S>>& params() { return params_; }
  ArrayX<S>& moment1(size_t i) { return moments1_[i]; }
  ArrayX<S>& moment2(size_t i) { return moments2_[i]; }
  void set_step(int64_t s) { step_ = s; }

 private:
  double base_lr_for(const std::string& name) const {
    double lr = cfg_.base_lr;
    size_t best = 0;
    for (const auto& [prefix, v] : lr_override_)
      if (name.rfind(prefix, 0) == 0 && prefix.size() >= best) {
        best = prefix.size();
        lr = v;
      }
    return lr;
  }

  std::vector<Tensor<S>> params_;
  std::vector<ArrayX<S>> moments1_, moments2_;
  AdamConfig cfg_;
  std::map<std::string, double> lr_override_;
  int64_t step_ = 0;
};

}  // namespace radiant
