#pragma once

// Transformer encoder backbone plus the three pre-training heads:
//   * masked-token prediction over corrupted dialogue text (weight-tied);
//   * biaffine arc + label scoring of projected relation triples;
//   * contrastive text/graph agreement over pooled [CLS] vectors.
//
// Two encoder parameter sets exist ("text" and "amr"); the AMR side is
// cloned from the text side at construction and drifts apart as training
// updates them separately.

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sara/alignment.hpp"
#include "sara/checkpoint.hpp"
#include "sara/errors.hpp"
#include "sara/masking.hpp"
#include "sara/rng.hpp"
#include "sara/tensor.hpp"

namespace sara {

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t hidden_dim = 128;
  std::size_t layers = 4;
  std::size_t heads = 4;
  std::size_t ffn_dim = 512;
  std::size_t max_positions = 512;
  std::size_t biaffine_dim = 64;   // d' of the relation MLPs
  std::size_t pooler_dim = 128;
  std::size_t num_labels = 0;      // relation inventory incl. reserved unseen
  double dropout = 0.0;
  bool sum_losses = false;         // false: losses are means (default)

  void validate() const;  // throws ConfigError
  std::string to_json() const;
  static ModelConfig from_json(const std::string& json_text);
};

// Ordered relation-label universe; the last index is reserved for labels
// unseen at preprocessing time. The order is frozen into checkpoints.
class RelationLabelInventory {
 public:
  static constexpr const char* kUnseenLabel = "<unseen>";

  RelationLabelInventory() = default;
  // Sorted unique labels + the reserved unseen slot appended last.
  static RelationLabelInventory from_labels(const std::set<std::string>& labels);
  // Restores a persisted inventory verbatim (must end with the unseen slot).
  static RelationLabelInventory from_ordered(std::vector<std::string> labels);

  std::size_t size() const { return labels_.size(); }
  std::size_t unseen_index() const { return labels_.size() - 1; }
  bool contains(const std::string& label) const;
  // Unseen labels map to unseen_index().
  std::size_t index_of(const std::string& label) const;
  const std::string& label(std::size_t index) const { return labels_.at(index); }
  const std::vector<std::string>& labels() const { return labels_; }

 private:
  std::vector<std::string> labels_;
  std::map<std::string, std::size_t> index_;
};

struct EncoderOutput {
  Tensor hidden;  // n x d
};

// Loss head result: `sum` is the un-normalized scalar, `count` the number of
// contributing terms. value() applies the configured reduction.
struct HeadLoss {
  Tensor sum;              // scalar graph node (constant 0 when empty)
  std::size_t count = 0;
  bool empty = false;
  std::size_t unseen_labels = 0;  // relation head only

  Tensor mean() const {
    return count > 1 ? mul_scalar(sum, 1.0 / static_cast<double>(count)) : sum;
  }
  Tensor value(bool sum_losses) const { return sum_losses ? sum : mean(); }
};

class DialogueModel {
 public:
  DialogueModel(ModelConfig config, RelationLabelInventory inventory, Rng& rng);

  const ModelConfig& config() const { return config_; }
  const RelationLabelInventory& inventory() const { return inventory_; }

  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  Tensor parameter(const std::string& name) const;  // throws DataError

  std::vector<TensorRecord> state() const;
  // Strict: record set must match the parameter set exactly (names+shapes).
  void load_state(const std::vector<TensorRecord>& records);

  // Transformer forward. `is_pad`, when given, marks positions excluded from
  // attention; `dropout_rng` enables dropout (training mode) at the
  // configured rate.
  EncoderOutput encode(const std::vector<std::size_t>& ids,
                       const std::vector<bool>* is_pad = nullptr,
                       Rng* dropout_rng = nullptr) const;
  EncoderOutput encode_amr(const std::vector<std::size_t>& ids,
                           const std::vector<bool>* is_pad = nullptr,
                           Rng* dropout_rng = nullptr) const;

  // linear -> tanh over the first token's hidden state; 1 x pooler_dim.
  Tensor pool_text(const EncoderOutput& out) const;
  Tensor pool_amr(const EncoderOutput& out) const;

  // Negative log-likelihood of the original ids at the pattern's positions,
  // predicted from the corrupted encoding. Weight-tied to the text token
  // embedding plus an output bias.
  HeadLoss mlm_loss(const EncoderOutput& out, const MaskPattern& pattern) const;

  // Biaffine arc + label scoring of the projected triples (Eq-style
  // head->dependent normalization over positions; labels over inventory).
  HeadLoss relation_loss(const EncoderOutput& out,
                         const ProjectedEdgeSet& edges) const;

  // InfoNCE over cosine similarities at temperature tau; rows of the two
  // B x pooler_dim matrices are aligned pairs. negatives_per_example = 0
  // means every in-batch AMR is a candidate; k > 0 restricts the denominator
  // to the positive plus the k cyclically following neighbors.
  HeadLoss agreement_loss(const Tensor& text_pooled, const Tensor& amr_pooled,
                          double tau,
                          std::size_t negatives_per_example = 0) const;

 private:
  EncoderOutput run_encoder(const std::string& prefix,
                            const std::vector<std::size_t>& ids,
                            const std::vector<bool>* is_pad,
                            Rng* dropout_rng) const;
  Tensor pool_with(const std::string& prefix, const EncoderOutput& out) const;
  Tensor add_param(const std::string& name, std::size_t rows, std::size_t cols,
                   Rng& rng, double stddev);
  Tensor add_const_param(const std::string& name, std::size_t rows,
                         std::size_t cols, double fill);
  void build_encoder(const std::string& prefix, Rng& rng);
  void clone_encoder(const std::string& from, const std::string& to);

  ModelConfig config_;
  RelationLabelInventory inventory_;
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t> param_index_;
};

// Single linear layer for the downstream intent probe; parameters live with
// the caller so the pretrained model stays frozen.
Tensor intent_logits(const Tensor& pooled, const Tensor& weight,
                     const Tensor& bias);

}  // namespace sara
