#include "sara/optimizer.hpp"

#include <cmath>
#include <map>

namespace sara {

void AdamWConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("Adam betas must lie in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("Adam epsilon must be > 0");
  if (weight_decay < 0.0) throw ConfigError("weight decay must be >= 0");
  if (total_steps < 1) throw ConfigError("total_steps must be >= 1");
  if (warmup_steps >= total_steps)
    throw ConfigError("warmup_steps must be < total_steps");
}

AdamW::AdamW(std::vector<Parameter>& params, AdamWConfig config)
    : params_(params), config_(config) {
  config_.validate();
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Parameter& p : params_) {
    m_.emplace_back(p.tensor.size(), 0.0);
    v_.emplace_back(p.tensor.size(), 0.0);
  }
}

double AdamW::lr_at(std::size_t step) const {
  if (step >= config_.total_steps) return 0.0;
  if (step < config_.warmup_steps)
    return config_.lr * static_cast<double>(step + 1) /
           static_cast<double>(config_.warmup_steps);
  const double decay_span =
      static_cast<double>(config_.total_steps - config_.warmup_steps);
  return config_.lr *
         (1.0 - static_cast<double>(step - config_.warmup_steps) / decay_span);
}

void AdamW::step() {
  bool any_fresh = false;
  for (const Parameter& p : params_)
    if (p.trainable && !p.tensor.grad().empty()) {
      any_fresh = true;
      break;
    }
  if (!any_fresh)
    throw ConfigError("optimizer step without fresh gradients (no backward "
                      "since the last step)");

  const double lr = lr_at(step_);
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_ + 1));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_ + 1));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Parameter& p = params_[k];
    if (!p.trainable) continue;
    std::vector<double>& theta = p.tensor.values_mut();
    const std::vector<double>& grad = p.tensor.grad();
    std::vector<double>& m = m_[k];
    std::vector<double>& v = v_[k];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double g = grad.empty() ? 0.0 : grad[i];
      if (!std::isfinite(g))
        throw NumericError("non-finite gradient in '" + p.name + "'");
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      // Decoupled decay: applied to the weight, not folded into the moments.
      theta[i] -= lr * (m_hat / (std::sqrt(v_hat) + config_.eps) +
                        config_.weight_decay * theta[i]);
    }
  }
  ++step_;
  zero_grad();
}

void AdamW::zero_grad() {
  for (Parameter& p : params_)
    if (p.trainable) p.tensor.clear_grad();
}

std::vector<TensorRecord> AdamW::state() const {
  std::vector<TensorRecord> records;
  records.reserve(2 * params_.size() + 1);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    const Parameter& p = params_[k];
    records.push_back(TensorRecord{"adam.m." + p.name, p.tensor.rows(),
                                   p.tensor.cols(), m_[k]});
    records.push_back(TensorRecord{"adam.v." + p.name, p.tensor.rows(),
                                   p.tensor.cols(), v_[k]});
  }
  records.push_back(
      TensorRecord{"adam.step", 1, 1, {static_cast<double>(step_)}});
  return records;
}

void AdamW::load_state(const std::vector<TensorRecord>& records) {
  if (records.size() != 2 * params_.size() + 1)
    throw DataError("optimizer state has " + std::to_string(records.size()) +
                    " tensors, expected " +
                    std::to_string(2 * params_.size() + 1));
  std::map<std::string, const TensorRecord*> by_name;
  for (const TensorRecord& r : records) by_name.emplace(r.name, &r);
  auto fetch = [&](const std::string& name, std::size_t want) {
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw DataError("optimizer state missing '" + name + "'");
    if (it->second->data.size() != want)
      throw DataError("optimizer state '" + name + "' has wrong size");
    return it->second;
  };
  for (std::size_t k = 0; k < params_.size(); ++k) {
    const Parameter& p = params_[k];
    m_[k] = fetch("adam.m." + p.name, p.tensor.size())->data;
    v_[k] = fetch("adam.v." + p.name, p.tensor.size())->data;
  }
  step_ = static_cast<std::size_t>(fetch("adam.step", 1)->data[0]);
}

}  // namespace sara
