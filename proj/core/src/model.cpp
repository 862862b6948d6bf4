#include "sara/model.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace sara {

// ---------------------------------------------------------------------------
// ModelConfig
// ---------------------------------------------------------------------------

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v < 1) throw ConfigError(std::string(name) + " must be >= 1");
  };
  positive(vocab_size, "vocab_size");
  positive(hidden_dim, "hidden_dim");
  positive(heads, "heads");
  positive(ffn_dim, "ffn_dim");
  positive(max_positions, "max_positions");
  positive(biaffine_dim, "biaffine_dim");
  positive(pooler_dim, "pooler_dim");
  positive(num_labels, "num_labels");
  if (hidden_dim % heads != 0)
    throw ConfigError("hidden_dim " + std::to_string(hidden_dim) +
                      " not divisible by heads " + std::to_string(heads));
  if (!(dropout >= 0.0 && dropout < 1.0))
    throw ConfigError("dropout must lie in [0, 1)");
}

std::string ModelConfig::to_json() const {
  nlohmann::ordered_json j;
  j["vocab_size"] = vocab_size;
  j["hidden_dim"] = hidden_dim;
  j["layers"] = layers;
  j["heads"] = heads;
  j["ffn_dim"] = ffn_dim;
  j["max_positions"] = max_positions;
  j["biaffine_dim"] = biaffine_dim;
  j["pooler_dim"] = pooler_dim;
  j["num_labels"] = num_labels;
  j["dropout"] = dropout;
  j["sum_losses"] = sum_losses;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& json_text) {
  ModelConfig c;
  try {
    const auto j = nlohmann::json::parse(json_text);
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    c.layers = j.at("layers").get<std::size_t>();
    c.heads = j.at("heads").get<std::size_t>();
    c.ffn_dim = j.at("ffn_dim").get<std::size_t>();
    c.max_positions = j.at("max_positions").get<std::size_t>();
    c.biaffine_dim = j.at("biaffine_dim").get<std::size_t>();
    c.pooler_dim = j.at("pooler_dim").get<std::size_t>();
    c.num_labels = j.at("num_labels").get<std::size_t>();
    c.dropout = j.at("dropout").get<double>();
    c.sum_losses = j.at("sum_losses").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad model config JSON: ") + e.what());
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// RelationLabelInventory
// ---------------------------------------------------------------------------

RelationLabelInventory RelationLabelInventory::from_labels(
    const std::set<std::string>& labels) {
  std::vector<std::string> ordered(labels.begin(), labels.end());
  ordered.erase(std::remove(ordered.begin(), ordered.end(), kUnseenLabel),
                ordered.end());
  ordered.push_back(kUnseenLabel);
  return from_ordered(std::move(ordered));
}

RelationLabelInventory RelationLabelInventory::from_ordered(
    std::vector<std::string> labels) {
  if (labels.empty() || labels.back() != kUnseenLabel)
    throw DataError("label inventory must end with the reserved '" +
                    std::string(kUnseenLabel) + "' slot");
  RelationLabelInventory inv;
  inv.labels_ = std::move(labels);
  for (std::size_t i = 0; i < inv.labels_.size(); ++i)
    if (!inv.index_.emplace(inv.labels_[i], i).second)
      throw DataError("duplicate relation label '" + inv.labels_[i] + "'");
  return inv;
}

bool RelationLabelInventory::contains(const std::string& label) const {
  return index_.count(label) > 0;
}

std::size_t RelationLabelInventory::index_of(const std::string& label) const {
  auto it = index_.find(label);
  return it == index_.end() ? unseen_index() : it->second;
}

// ---------------------------------------------------------------------------
// DialogueModel — construction
// ---------------------------------------------------------------------------

namespace {

constexpr double kInitStddev = 0.02;
constexpr double kMaskValue = -1e30;

}  // namespace

Tensor DialogueModel::add_param(const std::string& name, std::size_t rows,
                                std::size_t cols, Rng& rng, double stddev) {
  Tensor t = stddev > 0.0 ? Tensor::randn(rows, cols, rng, stddev, true)
                          : Tensor::zeros(rows, cols, true);
  if (!param_index_.emplace(name, params_.size()).second)
    throw ConfigError("duplicate parameter name '" + name + "'");
  params_.push_back(Parameter{name, t, true});
  return t;
}

Tensor DialogueModel::add_const_param(const std::string& name, std::size_t rows,
                                      std::size_t cols, double fill) {
  Tensor t = Tensor::full(rows, cols, fill, true);
  if (!param_index_.emplace(name, params_.size()).second)
    throw ConfigError("duplicate parameter name '" + name + "'");
  params_.push_back(Parameter{name, t, true});
  return t;
}

void DialogueModel::build_encoder(const std::string& prefix, Rng& rng) {
  const std::size_t d = config_.hidden_dim;
  add_param(prefix + ".emb.tok", config_.vocab_size, d, rng, kInitStddev);
  add_param(prefix + ".emb.pos", config_.max_positions, d, rng, kInitStddev);
  for (std::size_t l = 0; l < config_.layers; ++l) {
    const std::string lp = prefix + ".l" + std::to_string(l);
    add_const_param(lp + ".ln1.gamma", 1, d, 1.0);
    add_const_param(lp + ".ln1.beta", 1, d, 0.0);
    for (const char* w : {"wq", "wk", "wv", "wo"})
      add_param(lp + ".attn." + w, d, d, rng, kInitStddev);
    for (const char* b : {"bq", "bk", "bv", "bo"})
      add_const_param(lp + ".attn." + b, 1, d, 0.0);
    add_const_param(lp + ".ln2.gamma", 1, d, 1.0);
    add_const_param(lp + ".ln2.beta", 1, d, 0.0);
    add_param(lp + ".ffn.w1", d, config_.ffn_dim, rng, kInitStddev);
    add_const_param(lp + ".ffn.b1", 1, config_.ffn_dim, 0.0);
    add_param(lp + ".ffn.w2", config_.ffn_dim, d, rng, kInitStddev);
    add_const_param(lp + ".ffn.b2", 1, d, 0.0);
  }
  add_const_param(prefix + ".lnf.gamma", 1, d, 1.0);
  add_const_param(prefix + ".lnf.beta", 1, d, 0.0);
  add_param(prefix + ".pool.w", d, config_.pooler_dim, rng, kInitStddev);
  add_const_param(prefix + ".pool.b", 1, config_.pooler_dim, 0.0);
}

void DialogueModel::clone_encoder(const std::string& from,
                                  const std::string& to) {
  for (Parameter& p : params_) {
    if (p.name.rfind(to + ".", 0) != 0) continue;
    const std::string source = from + p.name.substr(to.size());
    p.tensor.values_mut() = parameter(source).values();
  }
}

DialogueModel::DialogueModel(ModelConfig config,
                             RelationLabelInventory inventory, Rng& rng)
    : config_(std::move(config)), inventory_(std::move(inventory)) {
  if (config_.num_labels == 0) config_.num_labels = inventory_.size();
  config_.validate();
  if (config_.num_labels != inventory_.size())
    throw ConfigError("num_labels " + std::to_string(config_.num_labels) +
                      " does not match inventory size " +
                      std::to_string(inventory_.size()));

  const std::size_t d = config_.hidden_dim;
  const std::size_t dp = config_.biaffine_dim;
  build_encoder("text", rng);
  build_encoder("amr", rng);
  clone_encoder("text", "amr");  // "initialized with the same weights"

  add_const_param("mlm.bias", 1, config_.vocab_size, 0.0);
  for (const char* scorer : {"arc", "label"}) {
    for (const char* side : {"head", "dep"}) {
      const std::string mp = std::string("rel.") + scorer + "." + side;
      add_param(mp + ".w1", d, dp, rng, kInitStddev);
      add_const_param(mp + ".b1", 1, dp, 0.0);
      add_param(mp + ".w2", dp, dp, rng, kInitStddev);
      add_const_param(mp + ".b2", 1, dp, 0.0);
    }
  }
  add_param("rel.arc.w", dp + 1, dp, rng, kInitStddev);
  add_param("rel.label.w", config_.num_labels, (dp + 1) * dp, rng, kInitStddev);
}

Tensor DialogueModel::parameter(const std::string& name) const {
  auto it = param_index_.find(name);
  if (it == param_index_.end())
    throw DataError("unknown parameter '" + name + "'");
  return params_[it->second].tensor;
}

std::vector<TensorRecord> DialogueModel::state() const {
  std::vector<TensorRecord> records;
  records.reserve(params_.size());
  for (const Parameter& p : params_)
    records.push_back(TensorRecord{p.name, p.tensor.rows(), p.tensor.cols(),
                                   p.tensor.values()});
  return records;
}

void DialogueModel::load_state(const std::vector<TensorRecord>& records) {
  if (records.size() != params_.size())
    throw DataError("checkpoint has " + std::to_string(records.size()) +
                    " tensors, model expects " + std::to_string(params_.size()));
  std::map<std::string, const TensorRecord*> by_name;
  for (const TensorRecord& r : records)
    if (!by_name.emplace(r.name, &r).second)
      throw DataError("checkpoint repeats tensor '" + r.name + "'");
  for (Parameter& p : params_) {
    auto it = by_name.find(p.name);
    if (it == by_name.end())
      throw DataError("checkpoint is missing tensor '" + p.name + "'");
    const TensorRecord& r = *it->second;
    if (r.rows != p.tensor.rows() || r.cols != p.tensor.cols())
      throw DataError("checkpoint tensor '" + p.name + "' has shape [" +
                      std::to_string(r.rows) + "x" + std::to_string(r.cols) +
                      "], model expects " + p.tensor.shape_str());
    p.tensor.values_mut() = r.data;
  }
}

// ---------------------------------------------------------------------------
// Encoder forward
// ---------------------------------------------------------------------------

namespace {

// Inverted-dropout mask as a constant tensor; no-op when rng is null.
Tensor maybe_dropout(const Tensor& x, double rate, Rng* rng) {
  if (rng == nullptr || rate <= 0.0) return x;
  std::vector<double> mask(x.size());
  const double scale = 1.0 / (1.0 - rate);
  for (double& m : mask) m = rng->bernoulli(rate) ? 0.0 : scale;
  return mul(x, Tensor::from_values(x.rows(), x.cols(), std::move(mask)));
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  return add_rows(matmul(x, w), b);
}

}  // namespace

EncoderOutput DialogueModel::run_encoder(const std::string& prefix,
                                         const std::vector<std::size_t>& ids,
                                         const std::vector<bool>* is_pad,
                                         Rng* dropout_rng) const {
  const std::size_t n = ids.size();
  if (n == 0) throw DataError("encode: empty sequence");
  if (n > config_.max_positions)
    throw DataError("encode: sequence length " + std::to_string(n) +
                    " exceeds max positions " +
                    std::to_string(config_.max_positions));
  for (std::size_t id : ids)
    if (id >= config_.vocab_size)
      throw DataError("encode: token id " + std::to_string(id) +
                      " outside vocabulary of size " +
                      std::to_string(config_.vocab_size));
  if (is_pad && is_pad->size() != n)
    throw ShapeError("encode: pad mask length mismatch");

  std::vector<std::size_t> positions(n);
  for (std::size_t i = 0; i < n; ++i) positions[i] = i;

  Tensor x = add(gather_rows(parameter(prefix + ".emb.tok"), ids),
                 gather_rows(parameter(prefix + ".emb.pos"), positions));
  x = maybe_dropout(x, config_.dropout, dropout_rng);

  Tensor attn_mask;  // 1 x n additive row, only if any PAD present
  if (is_pad && std::find(is_pad->begin(), is_pad->end(), true) != is_pad->end()) {
    std::vector<double> m(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      if ((*is_pad)[i]) m[i] = kMaskValue;
    attn_mask = Tensor::from_values(1, n, std::move(m));
  }

  const std::size_t d = config_.hidden_dim;
  const std::size_t dh = d / config_.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (std::size_t l = 0; l < config_.layers; ++l) {
    const std::string lp = prefix + ".l" + std::to_string(l);
    // Pre-LN attention sublayer.
    Tensor h = layer_norm(x, parameter(lp + ".ln1.gamma"),
                          parameter(lp + ".ln1.beta"));
    Tensor q = linear(h, parameter(lp + ".attn.wq"), parameter(lp + ".attn.bq"));
    Tensor k = linear(h, parameter(lp + ".attn.wk"), parameter(lp + ".attn.bk"));
    Tensor v = linear(h, parameter(lp + ".attn.wv"), parameter(lp + ".attn.bv"));
    Tensor context;
    for (std::size_t head = 0; head < config_.heads; ++head) {
      const std::size_t b = head * dh, e = b + dh;
      Tensor scores = mul_scalar(
          matmul(slice_cols(q, b, e), transpose(slice_cols(k, b, e))), scale);
      if (attn_mask.defined()) scores = add_rows(scores, attn_mask);
      Tensor ctx = matmul(softmax_rows(scores), slice_cols(v, b, e));
      context = head == 0 ? ctx : concat_cols(context, ctx);
    }
    Tensor attn_out =
        linear(context, parameter(lp + ".attn.wo"), parameter(lp + ".attn.bo"));
    x = add(x, maybe_dropout(attn_out, config_.dropout, dropout_rng));

    // Pre-LN feed-forward sublayer.
    Tensor h2 = layer_norm(x, parameter(lp + ".ln2.gamma"),
                           parameter(lp + ".ln2.beta"));
    Tensor f = gelu(linear(h2, parameter(lp + ".ffn.w1"),
                           parameter(lp + ".ffn.b1")));
    f = linear(f, parameter(lp + ".ffn.w2"), parameter(lp + ".ffn.b2"));
    x = add(x, maybe_dropout(f, config_.dropout, dropout_rng));
  }
  // Final LayerNorm: pre-LN blocks leave the residual stream un-normalized,
  // which grows with depth/steps and saturates the tanh pooler.
  x = layer_norm(x, parameter(prefix + ".lnf.gamma"),
                 parameter(prefix + ".lnf.beta"));
  return EncoderOutput{x};
}

EncoderOutput DialogueModel::encode(const std::vector<std::size_t>& ids,
                                    const std::vector<bool>* is_pad,
                                    Rng* dropout_rng) const {
  return run_encoder("text", ids, is_pad, dropout_rng);
}

EncoderOutput DialogueModel::encode_amr(const std::vector<std::size_t>& ids,
                                        const std::vector<bool>* is_pad,
                                        Rng* dropout_rng) const {
  return run_encoder("amr", ids, is_pad, dropout_rng);
}

Tensor DialogueModel::pool_with(const std::string& prefix,
                                const EncoderOutput& out) const {
  if (!out.hidden.defined() || out.hidden.rows() == 0)
    throw DataError("pool: empty encoder output");
  Tensor first = gather_rows(out.hidden, {0});
  return tanh(linear(first, parameter(prefix + ".pool.w"),
                     parameter(prefix + ".pool.b")));
}

Tensor DialogueModel::pool_text(const EncoderOutput& out) const {
  return pool_with("text", out);
}

Tensor DialogueModel::pool_amr(const EncoderOutput& out) const {
  return pool_with("amr", out);
}

// ---------------------------------------------------------------------------
// Heads
// ---------------------------------------------------------------------------

HeadLoss DialogueModel::mlm_loss(const EncoderOutput& out,
                                 const MaskPattern& pattern) const {
  HeadLoss result;
  if (pattern.positions.empty()) {
    result.sum = Tensor::scalar(0.0);
    result.empty = true;
    return result;
  }
  const std::size_t n = out.hidden.rows();
  for (std::size_t pos : pattern.positions)
    if (pos >= n)
      throw DataError("mlm_loss: masked position " + std::to_string(pos) +
                      " outside sequence of length " + std::to_string(n));
  for (std::size_t id : pattern.original_ids)
    if (id >= config_.vocab_size)
      throw DataError("mlm_loss: target id outside vocabulary");

  Tensor picked = gather_rows(out.hidden, pattern.positions);
  Tensor logits = add_rows(matmul(picked, transpose(parameter("text.emb.tok"))),
                           parameter("mlm.bias"));
  Tensor logp = log_softmax_rows(logits);
  Tensor gold = pick_per_row(logp, pattern.original_ids);
  result.sum = mul_scalar(sum_all(gold), -1.0);
  result.count = pattern.positions.size();
  return result;
}

namespace {

// One-hidden-layer MLP with gelu: d -> d' -> d'.
Tensor rel_mlp(const DialogueModel& m, const Tensor& h, const std::string& p) {
  Tensor hidden = gelu(linear(h, m.parameter(p + ".w1"), m.parameter(p + ".b1")));
  return linear(hidden, m.parameter(p + ".w2"), m.parameter(p + ".b2"));
}

}  // namespace

HeadLoss DialogueModel::relation_loss(const EncoderOutput& out,
                                      const ProjectedEdgeSet& edges) const {
  HeadLoss result;
  if (edges.triples.empty()) {
    result.sum = Tensor::scalar(0.0);
    result.empty = true;
    return result;
  }
  const std::size_t n = out.hidden.rows();
  std::vector<std::size_t> heads, deps, labels;
  heads.reserve(edges.triples.size());
  deps.reserve(edges.triples.size());
  labels.reserve(edges.triples.size());
  for (const ProjectedEdge& e : edges.triples) {
    if (e.head >= n || e.dependent >= n)
      throw DataError("relation_loss: edge endpoint outside sequence of length " +
                      std::to_string(n));
    heads.push_back(e.head);
    deps.push_back(e.dependent);
    const std::size_t label = inventory_.index_of(e.label);
    if (label == inventory_.unseen_index() &&
        e.label != RelationLabelInventory::kUnseenLabel)
      ++result.unseen_labels;
    labels.push_back(label);
  }

  const Tensor ones = Tensor::full(n, 1, 1.0);

  // Arc scores s[i][j] = [r_j^D; 1]^T W_arc r_i^H for every pair, then a
  // log-softmax over dependent candidates j for each head row i.
  Tensor arc_head = rel_mlp(*this, out.hidden, "rel.arc.head");
  Tensor arc_dep = concat_cols(rel_mlp(*this, out.hidden, "rel.arc.dep"), ones);
  Tensor arc_scores =
      matmul(arc_head, transpose(matmul(arc_dep, parameter("rel.arc.w"))));
  Tensor arc_logp = log_softmax_rows(arc_scores);
  Tensor arc_gold = pick_per_row(gather_rows(arc_logp, heads), deps);

  // Label scores from separate MLPs and the 3-D tensor W_label, realized per
  // triple as vec([r_j^D; 1] ⊗ r_i^H) · vec(W_l).
  Tensor lab_head = rel_mlp(*this, out.hidden, "rel.label.head");
  Tensor lab_dep = concat_cols(rel_mlp(*this, out.hidden, "rel.label.dep"), ones);
  Tensor feats = row_outer(gather_rows(lab_dep, deps), gather_rows(lab_head, heads));
  Tensor lab_logits = matmul(feats, transpose(parameter("rel.label.w")));
  Tensor lab_gold = pick_per_row(log_softmax_rows(lab_logits), labels);

  result.sum = mul_scalar(add(sum_all(arc_gold), sum_all(lab_gold)), -1.0);
  result.count = edges.triples.size();
  return result;
}

HeadLoss DialogueModel::agreement_loss(const Tensor& text_pooled,
                                       const Tensor& amr_pooled, double tau,
                                       std::size_t negatives_per_example) const {
  if (!(tau > 0.0)) throw ConfigError("temperature must be > 0");
  if (!text_pooled.defined() || !amr_pooled.defined() ||
      text_pooled.rows() != amr_pooled.rows() ||
      text_pooled.cols() != amr_pooled.cols())
    throw ShapeError("agreement_loss: pooled batches differ, " +
                     text_pooled.shape_str() + " vs " + amr_pooled.shape_str());
  const std::size_t batch = text_pooled.rows();
  if (batch < 2)
    throw DataError("agreement_loss: batch of " + std::to_string(batch) +
                    " has no negatives");

  Tensor sims = matmul(l2_normalize_rows(text_pooled),
                       transpose(l2_normalize_rows(amr_pooled)));
  Tensor scaled = mul_scalar(sims, 1.0 / tau);
  if (negatives_per_example > 0 && negatives_per_example < batch - 1) {
    // Restrict N(i) to the positive plus the k cyclically following rows.
    std::vector<double> m(batch * batch, kMaskValue);
    for (std::size_t i = 0; i < batch; ++i)
      for (std::size_t off = 0; off <= negatives_per_example; ++off)
        m[i * batch + (i + off) % batch] = 0.0;
    scaled = add(scaled, Tensor::from_values(batch, batch, std::move(m)));
  }
  std::vector<std::size_t> diag(batch);
  for (std::size_t i = 0; i < batch; ++i) diag[i] = i;
  Tensor gold = pick_per_row(log_softmax_rows(scaled), diag);

  HeadLoss result;
  result.sum = mul_scalar(sum_all(gold), -1.0);
  result.count = batch;
  return result;
}

Tensor intent_logits(const Tensor& pooled, const Tensor& weight,
                     const Tensor& bias) {
  return add_rows(matmul(pooled, weight), bias);
}

}  // namespace sara
