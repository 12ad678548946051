#include "unimc/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "unimc/errors.hpp"

namespace unimc {

namespace {

constexpr char kMagic[8] = {'U', 'N', 'I', 'M', 'C', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  char bytes[4];
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(bytes, 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(bytes, 8);
}

void write_f64(std::ostream& out, double v) {
  write_u64(out, std::bit_cast<std::uint64_t>(v));
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  if (!in) throw DataError(ErrorCode::kCorrupt, "checkpoint truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  if (!in) throw DataError(ErrorCode::kCorrupt, "checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

double read_f64(std::istream& in) { return std::bit_cast<double>(read_u64(in)); }

std::string shape_str(const std::vector<std::size_t>& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

}  // namespace

std::string config_to_json(const ModelConfig& config) {
  nlohmann::json j;
  j["layers"] = config.layers;
  j["hidden"] = config.hidden;
  j["heads"] = config.heads;
  j["ffn_multiplier"] = config.ffn_multiplier;
  j["vocab_size"] = config.vocab_size;
  j["max_len"] = config.max_len;
  j["mlm_ratio"] = config.mlm_ratio;
  j["share_layer_parameters"] = config.share_layer_parameters;
  j["use_id_embeddings"] = config.ablation.use_id_embeddings;
  j["use_attention_mask"] = config.ablation.use_attention_mask;
  return j.dump();
}

ModelConfig config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(ErrorCode::kCorrupt, std::string("bad config json: ") + e.what());
  }
  ModelConfig config;
  try {
    config.layers = j.at("layers").get<int>();
    config.hidden = j.at("hidden").get<int>();
    config.heads = j.at("heads").get<int>();
    config.ffn_multiplier = j.at("ffn_multiplier").get<int>();
    config.vocab_size = j.at("vocab_size").get<int>();
    config.max_len = j.at("max_len").get<int>();
    config.mlm_ratio = j.at("mlm_ratio").get<double>();
    config.share_layer_parameters = j.at("share_layer_parameters").get<bool>();
    config.ablation.use_id_embeddings = j.at("use_id_embeddings").get<bool>();
    config.ablation.use_attention_mask = j.at("use_attention_mask").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(ErrorCode::kCorrupt, std::string("bad config json: ") + e.what());
  }
  return config;
}

void save_checkpoint(const ModelParameters& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(ErrorCode::kIoError, "cannot write checkpoint " + path);
  out.write(kMagic, sizeof(kMagic));
  write_u32(out, kVersion);
  const std::string config = config_to_json(params.config);
  write_u32(out, static_cast<std::uint32_t>(config.size()));
  out.write(config.data(), static_cast<std::streamsize>(config.size()));
  write_u32(out, static_cast<std::uint32_t>(params.named.size()));
  for (const auto& [name, tensor] : params.named) {
    write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(out, static_cast<std::uint32_t>(tensor->rank()));
    for (std::size_t d : tensor->shape()) write_u64(out, d);
    for (double v : tensor->values()) write_f64(out, v);
  }
  if (!out) throw DataError(ErrorCode::kIoError, "short write to " + path);
}

ModelParameters load_checkpoint(const std::string& path,
                                const std::optional<ModelConfig>& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(ErrorCode::kIoError, "cannot read checkpoint " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError(ErrorCode::kCorrupt, "bad checkpoint magic in " + path);
  }
  const std::uint32_t version = read_u32(in);
  if (version != kVersion) {
    throw DataError(ErrorCode::kCorrupt,
                    "unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t config_len = read_u32(in);
  std::string config_text(config_len, '\0');
  in.read(config_text.data(), config_len);
  if (!in) throw DataError(ErrorCode::kCorrupt, "checkpoint truncated");
  const ModelConfig config = config_from_json(config_text);
  config.validate();

  if (expected && !(config == *expected)) {
    std::ostringstream diff;
    diff << "checkpoint config does not match the requested config:";
    if (config.layers != expected->layers) {
      diff << " layers " << config.layers << " vs " << expected->layers << ";";
    }
    if (config.hidden != expected->hidden) {
      diff << " hidden " << config.hidden << " vs " << expected->hidden << ";";
    }
    if (config.heads != expected->heads) {
      diff << " heads " << config.heads << " vs " << expected->heads << ";";
    }
    if (config.vocab_size != expected->vocab_size) {
      diff << " vocab_size " << config.vocab_size << " vs " << expected->vocab_size << ";";
    }
    if (config.max_len != expected->max_len) {
      diff << " max_len " << config.max_len << " vs " << expected->max_len << ";";
    }
    throw DataError(ErrorCode::kShape, diff.str());
  }

  ModelParameters params;
  const std::uint32_t count = read_u32(in);
  for (std::uint32_t a = 0; a < count; ++a) {
    const std::uint32_t name_len = read_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw DataError(ErrorCode::kCorrupt, "checkpoint truncated");
    const std::uint32_t rank = read_u32(in);
    std::vector<std::size_t> shape;
    for (std::uint32_t d = 0; d < rank; ++d) {
      shape.push_back(static_cast<std::size_t>(read_u64(in)));
    }
    std::vector<double> values(shape_size(shape));
    for (double& v : values) v = read_f64(in);
    params.named.emplace(name, Tensor::from(shape, std::move(values), true));
  }

  // Manifest diff: every declared array present with the declared shape.
  std::ostringstream diff;
  bool mismatch = false;
  std::size_t expected_count = 0;
  for (const ManifestEntry& entry : parameter_manifest(config)) {
    ++expected_count;
    auto it = params.named.find(entry.name);
    if (it == params.named.end()) {
      diff << " missing " << entry.name << " " << shape_str(entry.shape) << ";";
      mismatch = true;
    } else if (it->second->shape() != entry.shape) {
      diff << " " << entry.name << " has shape " << shape_str(it->second->shape())
           << ", manifest says " << shape_str(entry.shape) << ";";
      mismatch = true;
    }
  }
  if (params.named.size() != expected_count) {
    diff << " checkpoint holds " << params.named.size() << " arrays, manifest lists "
         << expected_count << ";";
    mismatch = true;
  }
  if (mismatch) {
    throw DataError(ErrorCode::kShape, "manifest diff:" + diff.str());
  }
  params.wire(config);
  return params;
}

}  // namespace unimc
