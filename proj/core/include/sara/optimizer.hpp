#pragma once

// AdamW with decoupled weight decay and a warmup + linear-decay schedule.

#include <cstddef>
#include <string>
#include <vector>

#include "sara/checkpoint.hpp"
#include "sara/errors.hpp"
#include "sara/tensor.hpp"

namespace sara {

struct AdamWConfig {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  std::size_t warmup_steps = 0;
  std::size_t total_steps = 1;  // T of the linear decay; must cover the run

  void validate() const;  // throws ConfigError
};

class AdamW {
 public:
  // Holds a reference to the parameter list; the caller keeps it alive and
  // stable for the optimizer's lifetime.
  AdamW(std::vector<Parameter>& params, AdamWConfig config);

  // Schedule value used by the (step+1)-th update: linear ramp over the
  // warmup, then lr0 * (1 - (step - warmup) / (T - warmup)).
  double lr_at(std::size_t step) const;
  double current_lr() const { return lr_at(step_); }
  std::size_t steps_taken() const { return step_; }

  // One update from the accumulated grads, then marks them stale.
  // Throws ConfigError if no fresh grads exist (step before backward).
  void step();
  void zero_grad();  // drops grad buffers (the staleness marker)

  // Moments + step counter, round-trippable through the tensor container.
  std::vector<TensorRecord> state() const;
  void load_state(const std::vector<TensorRecord>& records);

 private:
  std::vector<Parameter>& params_;
  AdamWConfig config_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t step_ = 0;
};

}  // namespace sara
