#pragma once

// Minimal dense f64 tensor (rank <= 2, row-major) with reverse-mode
// automatic differentiation.
//
// Every op records a backward closure on the freshly created node; calling
// backward(loss) on a scalar walks the graph in reverse topological order.
// Gradients of leaf tensors (requires_grad, no parents) accumulate across
// backward calls (+=); intermediate gradients are re-zeroed per call. Leaves
// must therefore be zero_grad()-ed between optimizer steps.
//
// The library is deliberately single-threaded and unoptimized except for
// cache-friendly loop orders: desk-scale fidelity over speed.

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "sara/errors.hpp"
#include "sara/rng.hpp"

namespace sara {

namespace detail {

struct TensorNode {
  std::size_t rows = 0, cols = 0;
  std::vector<double> value;
  std::vector<double> grad;  // sized lazily by backward(); may stay empty
  bool requires_grad = false;  // leaf flag: optimizer-visible
  bool needs_grad = false;     // this or some ancestor requires grad
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward_fn;  // reads this->grad
  const char* op = "leaf";
};

}  // namespace detail

// Global checked mode: when on (default), ops reject non-finite outputs with
// NumericError. Turning it off removes the scan, not the math.
void set_checked_mode(bool enabled);
bool checked_mode();

class Tensor {
 public:
  Tensor() = default;  // empty; most methods throw until assigned

  static Tensor zeros(std::size_t rows, std::size_t cols,
                      bool requires_grad = false);
  static Tensor full(std::size_t rows, std::size_t cols, double fill,
                     bool requires_grad = false);
  static Tensor from_values(std::size_t rows, std::size_t cols,
                            std::vector<double> values,
                            bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);
  // N(0, stddev^2) entries drawn from `rng` in row-major order.
  static Tensor randn(std::size_t rows, std::size_t cols, Rng& rng,
                      double stddev, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  std::size_t rows() const;
  std::size_t cols() const;
  std::size_t size() const { return rows() * cols(); }
  std::string shape_str() const;
  bool requires_grad() const;

  double at(std::size_t r, std::size_t c) const;
  double item() const;  // 1x1 only
  const std::vector<double>& values() const;
  std::vector<double>& values_mut();  // optimizer/in-place init; leaves only
  const std::vector<double>& grad() const;  // empty until backward touches it
  void zero_grad();
  // Drops the grad buffer entirely; backward() re-creates it. The optimizer
  // uses the empty-buffer state as its "grads are stale" marker.
  void clear_grad();

  // Leaf copy of the current values; drops the graph.
  Tensor detach() const;

  const std::shared_ptr<detail::TensorNode>& node() const { return node_; }
  static Tensor wrap(std::shared_ptr<detail::TensorNode> node);

 private:
  std::shared_ptr<detail::TensorNode> node_;
};

// A named trainable (or frozen) leaf. Names are unique within a model.
struct Parameter {
  std::string name;
  Tensor tensor;
  bool trainable = true;
};

// --- elementwise (same shape) ---
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

// --- scalar broadcast ---
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);

// --- row/column broadcast: `row` is 1xC, `col` is Rx1 ---
Tensor add_rows(const Tensor& a, const Tensor& row);
Tensor mul_rows(const Tensor& a, const Tensor& row);
Tensor sub_cols(const Tensor& a, const Tensor& col);
Tensor mul_cols(const Tensor& a, const Tensor& col);
Tensor div_cols(const Tensor& a, const Tensor& col);

// --- linear algebra / shape ---
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor concat_rows(const Tensor& a, const Tensor& b);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
Tensor gather_rows(const Tensor& a, const std::vector<std::size_t>& indices);
// out[i,0] = a[i, cols[i]]
Tensor pick_per_row(const Tensor& a, const std::vector<std::size_t>& cols);
// out[i, u*b.cols()+v] = a[i,u] * b[i,v]  (per-row outer product, flattened)
Tensor row_outer(const Tensor& a, const Tensor& b);

// --- nonlinearities (elementwise) ---
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);   // domain error if any entry <= 0 (checked mode)
Tensor sqrt(const Tensor& a);  // domain error if any entry < 0 (checked mode)
Tensor tanh(const Tensor& a);
Tensor gelu(const Tensor& a);  // exact form: 0.5 x (1 + erf(x / sqrt(2)))

// --- softmax family (row-wise; numerically stable) ---
Tensor softmax_rows(const Tensor& a);
Tensor log_softmax_rows(const Tensor& a);

// --- reductions ---
Tensor sum_all(const Tensor& a);   // 1x1
Tensor mean_all(const Tensor& a);  // 1x1
Tensor sum_axis1(const Tensor& a);   // Rx1 row sums
Tensor mean_axis1(const Tensor& a);  // Rx1 row means

// --- composites (built from the primitives; backward comes for free) ---
// Per-row normalization: gamma/beta are 1xC.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);
// Rows scaled to unit L2 norm; throws NumericError on a zero-norm row.
Tensor l2_normalize_rows(const Tensor& x);
// Row-wise cosine similarity of equal-shape a and b -> Rx1.
Tensor cosine_similarity(const Tensor& a, const Tensor& b);

// Reverse-mode pass from a scalar loss. Leaf grads accumulate.
void backward(const Tensor& loss);

// --- finite-difference verification harness ---
struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
};
struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_parameter;
  std::vector<GradCheckEntry> entries;
  std::vector<std::string> failures;  // entries above tolerance
  bool ok(double tolerance) const { return max_rel_err < tolerance; }
};

// Central differences on every entry of every trainable parameter:
// rebuilds f() per probe, so f must be deterministic.
GradCheckReport gradient_check(const std::function<Tensor()>& f,
                               std::vector<Parameter>& params,
                               double eps = 1e-5, double tolerance = 1e-4);

}  // namespace sara
