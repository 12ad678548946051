#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "unimc/encoding.hpp"
#include "unimc/tensor.hpp"

namespace unimc {

struct AblationFlags {
  bool use_id_embeddings = true;   // segment + restarted position embeddings
  bool use_attention_mask = true;  // cross-option blocking
  bool operator==(const AblationFlags&) const = default;
};

struct ModelConfig {
  int layers = 2;
  int hidden = 64;
  int heads = 4;
  int ffn_multiplier = 4;
  int vocab_size = 0;
  int max_len = 512;
  double mlm_ratio = 0.15;
  bool share_layer_parameters = true;
  AblationFlags ablation;

  int ffn_size() const { return hidden * ffn_multiplier; }
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Named presets: toy is the default desk-scale model, the other three keep
// the depth/width/head progression of the published variant family at a
// fraction of the size.
ModelConfig preset_config(const std::string& name, int vocab_size, int max_len);
std::vector<std::string> preset_names();

enum class InitKind { kNormal, kZero, kOne };

struct ManifestEntry {
  std::string name;
  std::vector<std::size_t> shape;
  InitKind init;
};

// Every array's name and shape, fully determined by the config.
std::vector<ManifestEntry> parameter_manifest(const ModelConfig& config);

struct LayerParameters {
  TensorPtr wq, bq, wk, bk, wv, bv, wo, bo;
  TensorPtr attn_norm_gain, attn_norm_bias;
  TensorPtr ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  TensorPtr ffn_norm_gain, ffn_norm_bias;
};

// The vocabulary head is tied to the token embedding table; only its bias is
// a separate array.
struct ModelParameters {
  ModelConfig config;
  std::map<std::string, TensorPtr> named;  // manifest name -> array
  TensorPtr token_embedding, segment_embedding, position_embedding;
  TensorPtr embedding_norm_gain, embedding_norm_bias;
  TensorPtr head_bias;
  std::vector<LayerParameters> layers;  // one entry when layers are shared

  const LayerParameters& layer(int index) const {
    return layers[config.share_layer_parameters ? 0 : static_cast<std::size_t>(index)];
  }
  std::size_t parameter_count() const;
  void zero_grad();

  // Rebuilds the typed accessors from `named`; used after loading.
  void wire(const ModelConfig& cfg);
};

// Truncated normal(0, 0.02) weights, zero biases, unit layer-norm gains,
// deterministic per seed.
ModelParameters init_parameters(const ModelConfig& config, std::uint64_t seed);

// Per-(layer, head, example) post-softmax attention rows, for inspection.
struct AttentionCapture {
  // probs[layer][head][example] is an L*L row-major matrix.
  std::vector<std::vector<std::vector<std::vector<double>>>> probs;
  int seq_len = 0;
};

// Bidirectional encoder: embeddings, then per layer multi-head self-attention
// with the additive option mask followed by the FFN, post-norm residuals.
// Returns hidden states as a (B*L) x hidden matrix.
TensorPtr encode(const TrainingBatch& batch, const ModelParameters& params,
                 AttentionCapture* capture = nullptr);

// (B*L) x vocab logits through the tied embedding table plus bias.
TensorPtr vocab_logits(const TensorPtr& hidden, const ModelParameters& params);

// Per-example loss terms; absent targets give a constant zero (MLM) or are an
// error (O-MLM/OP in training mode). Each batch loss is the mean of its
// per-example terms.
std::vector<TensorPtr> per_example_mlm_losses(const TensorPtr& logits,
                                              const TrainingBatch& batch);
std::vector<TensorPtr> per_example_omlm_losses(const TensorPtr& logits,
                                               const TrainingBatch& batch);
std::vector<TensorPtr> per_example_op_losses(const TensorPtr& logits,
                                             const TrainingBatch& batch);

TensorPtr mlm_loss(const TensorPtr& logits, const TrainingBatch& batch);
TensorPtr omlm_loss(const TensorPtr& logits, const TrainingBatch& batch);
TensorPtr op_loss(const TensorPtr& logits, const TrainingBatch& batch);

// B x N_max probabilities: yes-logit per option slot, plus the logit mask,
// softmax across slots. Padded slots are exactly 0.
TensorPtr op_distribution(const TensorPtr& logits, const TrainingBatch& batch);

struct LossWeights {
  double mlm = 1.0;
  double omlm = 1.0;
  double op = 1.0;
};

struct LossBreakdown {
  double l_mlm = 0.0;
  double l_omlm = 0.0;
  double l_op = 0.0;
  double l_full = 0.0;
  TensorPtr node;  // graph node of l_full, for backward()
};

// One forward pass feeding all three objectives. The batch must already
// carry its MLM and O-MLM masks.
LossBreakdown total_loss(const TrainingBatch& batch, const ModelParameters& params,
                         const LossWeights& weights = {});

}  // namespace unimc
