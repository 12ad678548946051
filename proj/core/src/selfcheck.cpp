#include "unimc/selfcheck.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include "unimc/encoding.hpp"
#include "unimc/model.hpp"
#include "unimc/ops.hpp"
#include "unimc/tokenizer.hpp"

namespace unimc {

namespace {

constexpr double kBlocked = std::numeric_limits<double>::lowest();

std::string word(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> len(2, 6);
  std::uniform_int_distribution<int> ch(0, 25);
  std::string out;
  const int n = len(rng);
  for (int i = 0; i < n; ++i) out.push_back(static_cast<char>('a' + ch(rng)));
  return out;
}

std::string phrase(std::mt19937_64& rng, int words) {
  std::string out;
  for (int i = 0; i < words; ++i) {
    if (!out.empty()) out += " ";
    out += word(rng);
  }
  return out;
}

MCExample sample_example(std::mt19937_64& rng, int options) {
  MCExample ex;
  for (int i = 0; i < options; ++i) {
    ex.options.push_back(std::to_string(i) + word(rng) + " " + phrase(rng, 2));
  }
  ex.question = phrase(rng, 3);
  ex.passage = phrase(rng, 6);
  ex.answer = static_cast<int>(rng() % static_cast<unsigned>(options));
  return ex;
}

Vocab vocab_of(const std::vector<MCExample>& examples) {
  std::string corpus;
  for (const MCExample& ex : examples) {
    corpus += ex.passage + "\n" + (ex.question ? *ex.question : "") + "\n";
    for (const std::string& o : ex.options) corpus += o + "\n";
  }
  return build_vocab(corpus, 512);
}

TrainingBatch batch_of(const std::vector<MCExample>& examples, const Vocab& vocab,
                       int max_len, double mlm_ratio, std::uint64_t mask_seed) {
  std::mt19937_64 rng(mask_seed);
  std::vector<EncodedInput> encoded;
  for (const MCExample& ex : examples) {
    EncodedInput enc = assemble(ex, vocab, max_len);
    enc = apply_omlm_mask(enc, ex.answer);
    encoded.push_back(apply_mlm_mask(enc, mlm_ratio, rng));
  }
  return collate(encoded);
}

bool check(std::ostream& out, const char* name, bool ok) {
  out << (ok ? "PASS" : "FAIL") << " " << name << "\n";
  return ok;
}

}  // namespace

bool run_selfcheck(std::ostream& out, std::uint64_t seed) {
  bool all = true;
  std::mt19937_64 rng(seed);

  {  // analytic anchors
    TensorPtr x = Tensor::from({3}, {2.0, 1.0, 9.0});
    TensorPtr mask = Tensor::from({3}, {0.0, 0.0, kBlocked});
    TensorPtr y = ops::masked_softmax(x, mask, 0);
    const bool ok = std::abs(y->values()[0] - 0.7311) < 5e-5 &&
                    std::abs(y->values()[1] - 0.2689) < 5e-5 && y->values()[2] == 0.0;
    TensorPtr uniform = Tensor::zeros({7});
    const bool ln_ok =
        std::abs(ops::cross_entropy(uniform, {3})->item() - std::log(7.0)) < 1e-12;
    all &= check(out, "softmax/cross-entropy anchors", ok && ln_ok);
  }

  {  // option isolation
    bool ok = true;
    for (int trial = 0; trial < 5; ++trial) {
      const MCExample ex = sample_example(rng, 2 + trial % 3);
      const Vocab vocab = vocab_of({ex});
      ModelConfig config;
      config.layers = 2, config.hidden = 16, config.heads = 2, config.ffn_multiplier = 2;
      config.vocab_size = vocab.size(), config.max_len = 64;
      const ModelParameters params = init_parameters(config, seed + trial);
      const TrainingBatch batch = batch_of({ex}, vocab, 64, 0.2, trial);
      AttentionCapture capture;
      encode(batch, params, &capture);
      const EncodedInput enc = assemble(ex, vocab, 64);
      const int L = capture.seq_len;
      for (const auto& layer : capture.probs) {
        for (const auto& head : layer) {
          for (int i = 0; i < enc.length(); ++i) {
            for (int j = 0; j < enc.length(); ++j) {
              if (enc.attention_allow[static_cast<std::size_t>(i * enc.length() + j)] == 0 &&
                  head[0][static_cast<std::size_t>(i * L + j)] != 0.0) {
                ok = false;
              }
            }
          }
        }
      }
    }
    all &= check(out, "cross-option attention isolation", ok);
  }

  {  // permutation equivariance
    bool ok = true;
    for (int trial = 0; trial < 5; ++trial) {
      MCExample ex = sample_example(rng, 3);
      const Vocab vocab = vocab_of({ex});
      ModelConfig config;
      config.layers = 2, config.hidden = 16, config.heads = 2, config.ffn_multiplier = 2;
      config.vocab_size = vocab.size(), config.max_len = 64;
      const ModelParameters params = init_parameters(config, seed + 10 + trial);

      MCExample permuted = ex;
      const std::vector<std::size_t> perm = {2, 0, 1};
      for (std::size_t i = 0; i < 3; ++i) permuted.options[i] = ex.options[perm[i]];
      permuted.answer = 0;

      const TrainingBatch a = batch_of({ex}, vocab, 64, 0.0, 0);
      const TrainingBatch b = batch_of({permuted}, vocab, 64, 0.0, 0);
      const TensorPtr da = op_distribution(vocab_logits(encode(a, params), params), a);
      const TensorPtr db = op_distribution(vocab_logits(encode(b, params), params), b);
      for (std::size_t i = 0; i < 3; ++i) {
        if (std::abs(db->values()[i] - da->values()[perm[i]]) > 1e-9) ok = false;
      }
    }
    all &= check(out, "option permutation equivariance", ok);
  }

  {  // mixed-batch loss parity
    std::vector<MCExample> examples = {sample_example(rng, 2), sample_example(rng, 3),
                                       sample_example(rng, 5)};
    const Vocab vocab = vocab_of(examples);
    ModelConfig config;
    config.layers = 2, config.hidden = 16, config.heads = 2, config.ffn_multiplier = 2;
    config.vocab_size = vocab.size(), config.max_len = 96;
    const ModelParameters params = init_parameters(config, seed + 20);

    std::mt19937_64 mask_rng(3);
    std::vector<EncodedInput> encoded;
    for (const MCExample& ex : examples) {
      EncodedInput enc = assemble(ex, vocab, 96);
      enc = apply_omlm_mask(enc, ex.answer);
      encoded.push_back(apply_mlm_mask(enc, 0.3, mask_rng));
    }
    const TrainingBatch batch = collate(encoded);
    const TensorPtr logits = vocab_logits(encode(batch, params), params);
    const auto op = per_example_op_losses(logits, batch);
    const auto omlm = per_example_omlm_losses(logits, batch);
    bool ok = true;
    for (std::size_t b = 0; b < encoded.size(); ++b) {
      const TrainingBatch solo = collate({encoded[b]});
      const TensorPtr solo_logits = vocab_logits(encode(solo, params), params);
      ok &= std::abs(per_example_op_losses(solo_logits, solo)[0]->item() -
                     op[b]->item()) < 1e-9;
      ok &= std::abs(per_example_omlm_losses(solo_logits, solo)[0]->item() -
                     omlm[b]->item()) < 1e-9;
    }
    all &= check(out, "mixed-batch logit-mask loss parity", ok);
  }

  {  // gradient check on a small model
    std::vector<MCExample> examples = {sample_example(rng, 2)};
    const Vocab vocab = vocab_of(examples);
    ModelConfig config;
    config.layers = 1, config.hidden = 8, config.heads = 2, config.ffn_multiplier = 2;
    config.vocab_size = vocab.size(), config.max_len = 48;
    ModelParameters params = init_parameters(config, seed + 30);
    const TrainingBatch batch = batch_of(examples, vocab, 48, 0.3, 4);

    params.zero_grad();
    backward(total_loss(batch, params).node);
    const double h = 1e-6;
    double worst = 0.0;
    for (auto& [name, tensor] : params.named) {
      for (std::size_t i = 0; i < tensor->size(); ++i) {
        const double orig = tensor->values()[i];
        tensor->values()[i] = orig + h;
        const double up = total_loss(batch, params).l_full;
        tensor->values()[i] = orig - h;
        const double down = total_loss(batch, params).l_full;
        tensor->values()[i] = orig;
        const double numeric = (up - down) / (2.0 * h);
        const double analytic = tensor->grad()[i];
        worst = std::max(worst, std::abs(analytic - numeric) /
                                    std::max({1.0, std::abs(analytic), std::abs(numeric)}));
      }
    }
    std::ostringstream label;
    label << "gradient check vs central differences (max rel err " << worst << ")";
    all &= check(out, label.str().c_str(), worst < 1e-4);
  }

  out << (all ? "selfcheck passed" : "selfcheck FAILED") << "\n";
  return all;
}

}  // namespace unimc
