#include "unimc/model.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "unimc/errors.hpp"
#include "unimc/ops.hpp"

namespace unimc {

namespace {

constexpr double kBlocked = std::numeric_limits<double>::lowest();

std::string layer_prefix(const ModelConfig& config, int layer) {
  return config.share_layer_parameters ? "shared" : "layer" + std::to_string(layer);
}

}  // namespace

void ModelConfig::validate() const {
  if (layers < 1) throw DataError(ErrorCode::kBadConfig, "layers must be >= 1");
  if (hidden < 2 || hidden % 2 != 0) {
    throw DataError(ErrorCode::kBadConfig, "hidden must be a positive even number");
  }
  if (heads < 1 || hidden % heads != 0) {
    throw DataError(ErrorCode::kBadConfig, "heads must divide hidden");
  }
  if (ffn_multiplier < 1) throw DataError(ErrorCode::kBadConfig, "ffn_multiplier must be >= 1");
  if (vocab_size < special::kNo + 1) {
    throw DataError(ErrorCode::kBadConfig, "vocab_size must cover the specials plus yes/no");
  }
  if (max_len < 16) throw DataError(ErrorCode::kBadConfig, "max_len must be >= 16");
  if (mlm_ratio < 0.0 || mlm_ratio > 1.0) {
    throw DataError(ErrorCode::kBadConfig, "mlm_ratio must lie in [0, 1]");
  }
}

ModelConfig preset_config(const std::string& name, int vocab_size, int max_len) {
  ModelConfig config;
  config.vocab_size = vocab_size;
  config.max_len = max_len;
  if (name == "toy") {
    config.layers = 2, config.hidden = 64, config.heads = 4;
  } else if (name == "small") {
    config.layers = 3, config.hidden = 48, config.heads = 3;
  } else if (name == "medium") {
    config.layers = 6, config.hidden = 128, config.heads = 4;
  } else if (name == "wide") {
    config.layers = 3, config.hidden = 256, config.heads = 16;
  } else {
    throw DataError(ErrorCode::kBadConfig, "unknown preset '" + name + "'");
  }
  return config;
}

std::vector<std::string> preset_names() { return {"toy", "small", "medium", "wide"}; }

std::vector<ManifestEntry> parameter_manifest(const ModelConfig& config) {
  config.validate();
  const auto V = static_cast<std::size_t>(config.vocab_size);
  const auto H = static_cast<std::size_t>(config.hidden);
  const auto F = static_cast<std::size_t>(config.ffn_size());
  const auto P = static_cast<std::size_t>(config.max_len);

  std::vector<ManifestEntry> manifest;
  manifest.push_back({"embeddings.token", {V, H}, InitKind::kNormal});
  manifest.push_back({"embeddings.segment", {2, H}, InitKind::kNormal});
  manifest.push_back({"embeddings.position", {P, H}, InitKind::kNormal});
  manifest.push_back({"embeddings.norm.gain", {H}, InitKind::kOne});
  manifest.push_back({"embeddings.norm.bias", {H}, InitKind::kZero});
  const int stacks = config.share_layer_parameters ? 1 : config.layers;
  for (int l = 0; l < stacks; ++l) {
    const std::string p = layer_prefix(config, l) + ".";
    manifest.push_back({p + "attn.wq", {H, H}, InitKind::kNormal});
    manifest.push_back({p + "attn.bq", {H}, InitKind::kZero});
    manifest.push_back({p + "attn.wk", {H, H}, InitKind::kNormal});
    manifest.push_back({p + "attn.bk", {H}, InitKind::kZero});
    manifest.push_back({p + "attn.wv", {H, H}, InitKind::kNormal});
    manifest.push_back({p + "attn.bv", {H}, InitKind::kZero});
    manifest.push_back({p + "attn.wo", {H, H}, InitKind::kNormal});
    manifest.push_back({p + "attn.bo", {H}, InitKind::kZero});
    manifest.push_back({p + "attn_norm.gain", {H}, InitKind::kOne});
    manifest.push_back({p + "attn_norm.bias", {H}, InitKind::kZero});
    manifest.push_back({p + "ffn.w1", {H, F}, InitKind::kNormal});
    manifest.push_back({p + "ffn.b1", {F}, InitKind::kZero});
    manifest.push_back({p + "ffn.w2", {F, H}, InitKind::kNormal});
    manifest.push_back({p + "ffn.b2", {H}, InitKind::kZero});
    manifest.push_back({p + "ffn_norm.gain", {H}, InitKind::kOne});
    manifest.push_back({p + "ffn_norm.bias", {H}, InitKind::kZero});
  }
  manifest.push_back({"head.bias", {V}, InitKind::kZero});
  return manifest;
}

void ModelParameters::wire(const ModelConfig& cfg) {
  config = cfg;
  token_embedding = named.at("embeddings.token");
  segment_embedding = named.at("embeddings.segment");
  position_embedding = named.at("embeddings.position");
  embedding_norm_gain = named.at("embeddings.norm.gain");
  embedding_norm_bias = named.at("embeddings.norm.bias");
  head_bias = named.at("head.bias");
  layers.clear();
  const int stacks = config.share_layer_parameters ? 1 : config.layers;
  for (int l = 0; l < stacks; ++l) {
    const std::string p = layer_prefix(config, l) + ".";
    LayerParameters lp;
    lp.wq = named.at(p + "attn.wq");
    lp.bq = named.at(p + "attn.bq");
    lp.wk = named.at(p + "attn.wk");
    lp.bk = named.at(p + "attn.bk");
    lp.wv = named.at(p + "attn.wv");
    lp.bv = named.at(p + "attn.bv");
    lp.wo = named.at(p + "attn.wo");
    lp.bo = named.at(p + "attn.bo");
    lp.attn_norm_gain = named.at(p + "attn_norm.gain");
    lp.attn_norm_bias = named.at(p + "attn_norm.bias");
    lp.ffn_w1 = named.at(p + "ffn.w1");
    lp.ffn_b1 = named.at(p + "ffn.b1");
    lp.ffn_w2 = named.at(p + "ffn.w2");
    lp.ffn_b2 = named.at(p + "ffn.b2");
    lp.ffn_norm_gain = named.at(p + "ffn_norm.gain");
    lp.ffn_norm_bias = named.at(p + "ffn_norm.bias");
    layers.push_back(std::move(lp));
  }
}

std::size_t ModelParameters::parameter_count() const {
  std::size_t count = 0;
  for (const auto& [name, tensor] : named) count += tensor->size();
  return count;
}

void ModelParameters::zero_grad() {
  for (auto& [name, tensor] : named) tensor->zero_grad();
}

ModelParameters init_parameters(const ModelConfig& config, std::uint64_t seed) {
  ModelParameters params;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.02);
  auto truncated = [&] {
    double z = normal(rng);
    while (std::abs(z) > 0.04) z = normal(rng);  // resample beyond 2 sigma
    return z;
  };
  for (const ManifestEntry& entry : parameter_manifest(config)) {
    TensorPtr tensor = Tensor::zeros(entry.shape, /*requires_grad=*/true);
    switch (entry.init) {
      case InitKind::kNormal:
        for (double& v : tensor->values()) v = truncated();
        break;
      case InitKind::kZero:
        break;
      case InitKind::kOne:
        for (double& v : tensor->values()) v = 1.0;
        break;
    }
    params.named.emplace(entry.name, std::move(tensor));
  }
  params.wire(config);
  return params;
}

namespace {

// Additive attention masks, one (L x L) constant tensor per example. Padding
// stays isolated even with the option mask ablated.
std::vector<TensorPtr> additive_masks(const TrainingBatch& batch, bool use_amm) {
  const std::size_t L = static_cast<std::size_t>(batch.max_len);
  std::vector<TensorPtr> masks;
  masks.reserve(static_cast<std::size_t>(batch.batch_size));
  for (int b = 0; b < batch.batch_size; ++b) {
    std::vector<double> mask(L * L, 0.0);
    const std::uint8_t* allow =
        batch.attention_allow.data() + static_cast<std::size_t>(b) * L * L;
    const std::size_t len = static_cast<std::size_t>(batch.lengths[static_cast<std::size_t>(b)]);
    for (std::size_t i = 0; i < L; ++i) {
      for (std::size_t j = 0; j < L; ++j) {
        bool blocked;
        if (use_amm) {
          blocked = allow[i * L + j] == 0;
        } else {
          blocked = (i >= len || j >= len) && i != j;
        }
        if (blocked) mask[i * L + j] = kBlocked;
      }
    }
    masks.push_back(Tensor::from({L, L}, std::move(mask)));
  }
  return masks;
}

}  // namespace

TensorPtr encode(const TrainingBatch& batch, const ModelParameters& params,
                 AttentionCapture* capture) {
  const ModelConfig& config = params.config;
  const std::size_t L = static_cast<std::size_t>(batch.max_len);
  const std::size_t B = static_cast<std::size_t>(batch.batch_size);
  const std::size_t H = static_cast<std::size_t>(config.hidden);
  const int heads = config.heads;
  const std::size_t dh = H / static_cast<std::size_t>(heads);

  for (int id : batch.token_ids) {
    if (id < 0 || id >= config.vocab_size) {
      throw DataError(ErrorCode::kIdRange,
                      "token id " + std::to_string(id) + " outside vocab of size " +
                          std::to_string(config.vocab_size));
    }
  }
  if (batch.max_len > config.max_len) {
    throw DataError(ErrorCode::kBadConfig,
                    "batch length " + std::to_string(batch.max_len) +
                        " exceeds model max_len " + std::to_string(config.max_len));
  }

  TensorPtr x = ops::embedding_lookup(params.token_embedding, batch.token_ids);
  if (config.ablation.use_id_embeddings) {
    x = ops::add(x, ops::embedding_lookup(params.segment_embedding, batch.segment_ids));
    x = ops::add(x, ops::embedding_lookup(params.position_embedding, batch.position_ids));
  }
  x = ops::layer_norm(x, params.embedding_norm_gain, params.embedding_norm_bias);

  const std::vector<TensorPtr> masks =
      additive_masks(batch, config.ablation.use_attention_mask);
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  if (capture) {
    capture->probs.assign(static_cast<std::size_t>(config.layers), {});
    capture->seq_len = batch.max_len;
  }

  for (int l = 0; l < config.layers; ++l) {
    const LayerParameters& lp = params.layer(l);
    TensorPtr q = ops::add(ops::matmul(x, lp.wq), lp.bq);
    TensorPtr k = ops::add(ops::matmul(x, lp.wk), lp.bk);
    TensorPtr v = ops::add(ops::matmul(x, lp.wv), lp.bv);

    if (capture) {
      (*capture).probs[static_cast<std::size_t>(l)].assign(
          static_cast<std::size_t>(heads), std::vector<std::vector<double>>(B));
    }

    std::vector<TensorPtr> example_ctx;
    example_ctx.reserve(B);
    for (std::size_t b = 0; b < B; ++b) {
      std::vector<TensorPtr> head_ctx;
      head_ctx.reserve(static_cast<std::size_t>(heads));
      for (int h = 0; h < heads; ++h) {
        const std::size_t c0 = static_cast<std::size_t>(h) * dh;
        TensorPtr qb = ops::block(q, b * L, L, c0, dh);
        TensorPtr kb = ops::block(k, b * L, L, c0, dh);
        TensorPtr vb = ops::block(v, b * L, L, c0, dh);
        TensorPtr scores = ops::scale(ops::matmul_nt(qb, kb), inv_sqrt_dh);
        TensorPtr probs = ops::masked_softmax(scores, masks[b], 1);
        if (capture) {
          (*capture).probs[static_cast<std::size_t>(l)][static_cast<std::size_t>(h)][b] =
              probs->values();
        }
        head_ctx.push_back(ops::matmul(probs, vb));
      }
      example_ctx.push_back(ops::concat_cols(head_ctx));
    }
    TensorPtr ctx = ops::concat_rows(example_ctx);
    TensorPtr attn_out = ops::add(ops::matmul(ctx, lp.wo), lp.bo);
    x = ops::layer_norm(ops::add(x, attn_out), lp.attn_norm_gain, lp.attn_norm_bias);

    TensorPtr inner = ops::gelu(ops::add(ops::matmul(x, lp.ffn_w1), lp.ffn_b1));
    TensorPtr ffn_out = ops::add(ops::matmul(inner, lp.ffn_w2), lp.ffn_b2);
    x = ops::layer_norm(ops::add(x, ffn_out), lp.ffn_norm_gain, lp.ffn_norm_bias);
  }
  return x;
}

TensorPtr vocab_logits(const TensorPtr& hidden, const ModelParameters& params) {
  return ops::add(ops::matmul_nt(hidden, params.token_embedding), params.head_bias);
}

namespace {

TensorPtr example_row_loss(const TensorPtr& logits, const TrainingBatch& batch, int b,
                           const std::vector<std::pair<int, int>>& targets) {
  if (targets.empty()) return Tensor::scalar(0.0);
  std::vector<int> rows;
  std::vector<int> ids;
  rows.reserve(targets.size());
  ids.reserve(targets.size());
  for (const auto& [pos, id] : targets) {
    rows.push_back(b * batch.max_len + pos);
    ids.push_back(id);
  }
  return ops::cross_entropy(ops::gather_rows(logits, rows), ids);
}

TensorPtr mean_of(const std::vector<TensorPtr>& losses) {
  TensorPtr acc = losses[0];
  for (std::size_t i = 1; i < losses.size(); ++i) acc = ops::add(acc, losses[i]);
  return ops::scale(acc, 1.0 / static_cast<double>(losses.size()));
}

// The Fig.-6 yes-logit row: real option slots gathered from the [O-MASK]
// positions, padded slots zero (the logit mask blocks them).
TensorPtr yes_logit_row(const TensorPtr& logits, const TrainingBatch& batch, int b) {
  std::vector<std::pair<int, int>> at;
  const auto& omasks = batch.omask_positions[static_cast<std::size_t>(b)];
  at.reserve(omasks.size());
  for (int pos : omasks) at.emplace_back(b * batch.max_len + pos, special::kYes);
  TensorPtr row = ops::gather_values(logits, at);
  const int pad = batch.max_options - static_cast<int>(omasks.size());
  if (pad > 0) {
    row = ops::concat_vec({row, Tensor::zeros({static_cast<std::size_t>(pad)})});
  }
  return row;
}

}  // namespace

std::vector<TensorPtr> per_example_mlm_losses(const TensorPtr& logits,
                                              const TrainingBatch& batch) {
  std::vector<TensorPtr> losses;
  for (int b = 0; b < batch.batch_size; ++b) {
    losses.push_back(
        example_row_loss(logits, batch, b, batch.mlm_targets[static_cast<std::size_t>(b)]));
  }
  return losses;
}

std::vector<TensorPtr> per_example_omlm_losses(const TensorPtr& logits,
                                               const TrainingBatch& batch) {
  std::vector<TensorPtr> losses;
  for (int b = 0; b < batch.batch_size; ++b) {
    const auto& targets = batch.omlm_targets[static_cast<std::size_t>(b)];
    if (targets.empty()) {
      throw DataError(ErrorCode::kMissingTargets,
                      "example " + std::to_string(b) + " carries no O-MLM targets");
    }
    losses.push_back(example_row_loss(logits, batch, b, targets));
  }
  return losses;
}

std::vector<TensorPtr> per_example_op_losses(const TensorPtr& logits,
                                             const TrainingBatch& batch) {
  std::vector<TensorPtr> losses;
  for (int b = 0; b < batch.batch_size; ++b) {
    const int label = batch.labels[static_cast<std::size_t>(b)];
    if (label < 0) {
      throw DataError(ErrorCode::kMissingTargets,
                      "example " + std::to_string(b) + " carries no answer label");
    }
    TensorPtr row = yes_logit_row(logits, batch, b);
    TensorPtr mask = Tensor::from(
        {static_cast<std::size_t>(batch.max_options)},
        std::vector<double>(
            batch.yes_logit_mask.begin() + static_cast<std::ptrdiff_t>(
                                               b * batch.max_options),
            batch.yes_logit_mask.begin() + static_cast<std::ptrdiff_t>(
                                               (b + 1) * batch.max_options)));
    losses.push_back(ops::masked_cross_entropy(row, mask, label));
  }
  return losses;
}

TensorPtr mlm_loss(const TensorPtr& logits, const TrainingBatch& batch) {
  return mean_of(per_example_mlm_losses(logits, batch));
}

TensorPtr omlm_loss(const TensorPtr& logits, const TrainingBatch& batch) {
  return mean_of(per_example_omlm_losses(logits, batch));
}

TensorPtr op_loss(const TensorPtr& logits, const TrainingBatch& batch) {
  return mean_of(per_example_op_losses(logits, batch));
}

TensorPtr op_distribution(const TensorPtr& logits, const TrainingBatch& batch) {
  std::vector<TensorPtr> rows;
  rows.reserve(static_cast<std::size_t>(batch.batch_size));
  for (int b = 0; b < batch.batch_size; ++b) {
    rows.push_back(yes_logit_row(logits, batch, b));
  }
  TensorPtr matrix = ops::stack_rows(rows);
  TensorPtr mask = Tensor::from(
      {static_cast<std::size_t>(batch.batch_size),
       static_cast<std::size_t>(batch.max_options)},
      batch.yes_logit_mask);
  return ops::masked_softmax(matrix, mask, 1);
}

LossBreakdown total_loss(const TrainingBatch& batch, const ModelParameters& params,
                         const LossWeights& weights) {
  TensorPtr hidden = encode(batch, params);
  TensorPtr logits = vocab_logits(hidden, params);

  TensorPtr l_mlm = mlm_loss(logits, batch);
  TensorPtr l_omlm = omlm_loss(logits, batch);
  TensorPtr l_op = op_loss(logits, batch);
  auto weighted = [](const TensorPtr& t, double w) {
    return w == 1.0 ? t : ops::scale(t, w);
  };
  TensorPtr full = ops::add(ops::add(weighted(l_mlm, weights.mlm),
                                     weighted(l_omlm, weights.omlm)),
                            weighted(l_op, weights.op));

  LossBreakdown out;
  out.l_mlm = l_mlm->item();
  out.l_omlm = l_omlm->item();
  out.l_op = l_op->item();
  out.l_full = full->item();
  out.node = full;
  return out;
}

}  // namespace unimc
