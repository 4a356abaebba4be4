#include "genft/checkpoint.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "genft/errors.hpp"

namespace genft {

namespace {

using nlohmann::json;

constexpr char kMagic[] = "GENFT1";
constexpr std::size_t kMagicLen = 6;

json group_manifest(const AdapterGroup& g) {
  json j;
  j["name"] = g.name();
  j["kind"] = to_string(g.kind());
  j["layers"] = g.layers();
  j["d_in"] = g.d_in();
  j["d_out"] = g.d_out();
  json blocks = json::array();
  if (g.kind() == AdapterKind::genft) {
    const GenFTSpec& s = g.genft_spec();
    j["a"] = s.shared_dim;
    j["b"] = s.specific_dim;
    j["hyper"] = {{"ratio", s.hyper.ratio},
                  {"scaling", s.hyper.scaling},
                  {"dropout", s.hyper.dropout},
                  {"sigma1", to_string(s.hyper.sigma1)},
                  {"sigma2", to_string(s.hyper.sigma2)},
                  {"bias", s.hyper.bias_enabled}};
    j["init"] = {{"a", to_string(s.init_a)},
                 {"b", to_string(s.init_b)},
                 {"shared", to_string(s.init_shared)}};
    j["ablation"] = to_string(s.ablation);
    j["mask_policy"] = to_string(s.mask_policy);
    blocks.push_back("Us");
    blocks.push_back("Vs");
    for (std::size_t l = 0; l < g.layers(); ++l) {
      blocks.push_back("A" + std::to_string(l));
      blocks.push_back("B" + std::to_string(l));
      if (s.hyper.bias_enabled) blocks.push_back("bias" + std::to_string(l));
    }
  } else {
    const LoraSpec& s = g.lora_spec();
    j["r"] = s.rank;
    j["lora_scaling"] = s.scaling;
    j["init"] = {{"a", to_string(s.init_a)}, {"b", to_string(s.init_b)}};
    for (std::size_t l = 0; l < g.layers(); ++l) {
      blocks.push_back("lora_A" + std::to_string(l));
      blocks.push_back("lora_B" + std::to_string(l));
    }
  }
  j["blocks"] = blocks;
  return j;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char bytes[4];
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) throw IoError("checkpoint: truncated header");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
  return v;
}

template <typename T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) throw IoError(std::string("checkpoint manifest: missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw IoError(std::string("checkpoint manifest: field '") + key + "': " + e.what());
  }
}

AdapterGroup read_group(std::istream& in, const json& j) {
  const auto name = field<std::string>(j, "name");
  const auto layers = field<std::size_t>(j, "layers");
  const auto d_in = field<std::size_t>(j, "d_in");
  const auto d_out = field<std::size_t>(j, "d_out");
  const AdapterKind kind = parse_adapter_kind(field<std::string>(j, "kind"));
  if (kind == AdapterKind::genft) {
    GenFTSpec spec;
    spec.shared_dim = field<std::size_t>(j, "a");
    spec.specific_dim = field<std::size_t>(j, "b");
    const json& h = j.at("hyper");
    spec.hyper.ratio = field<double>(h, "ratio");
    spec.hyper.scaling = field<double>(h, "scaling");
    spec.hyper.dropout = field<double>(h, "dropout");
    spec.hyper.sigma1 = parse_activation(field<std::string>(h, "sigma1"));
    spec.hyper.sigma2 = parse_activation(field<std::string>(h, "sigma2"));
    spec.hyper.bias_enabled = field<bool>(h, "bias");
    const json& init = j.at("init");
    spec.init_a = parse_init_scheme(field<std::string>(init, "a"));
    spec.init_b = parse_init_scheme(field<std::string>(init, "b"));
    spec.init_shared = parse_init_scheme(field<std::string>(init, "shared"));
    spec.ablation = parse_ablation(field<std::string>(j, "ablation"));
    spec.mask_policy = parse_mask_policy(field<std::string>(j, "mask_policy"));
    SharedFactors shared;
    shared.us = read_gftm(in);
    shared.vs = read_gftm(in);
    std::vector<LayerFactors> factors;
    std::vector<Matrix> biases;
    for (std::size_t l = 0; l < layers; ++l) {
      LayerFactors f;
      f.a = read_gftm(in);
      f.b = read_gftm(in);
      f.layer_index = l;
      factors.push_back(std::move(f));
      if (spec.hyper.bias_enabled) biases.push_back(read_gftm(in));
    }
    return AdapterGroup::restore_genft(name, layers, d_out, d_in, spec, std::move(shared),
                                       std::move(factors), std::move(biases));
  }
  LoraSpec spec;
  spec.rank = field<std::size_t>(j, "r");
  spec.scaling = field<double>(j, "lora_scaling");
  const json& init = j.at("init");
  spec.init_a = parse_init_scheme(field<std::string>(init, "a"));
  spec.init_b = parse_init_scheme(field<std::string>(init, "b"));
  std::vector<LoraFactors> factors;
  for (std::size_t l = 0; l < layers; ++l) {
    LoraFactors f;
    f.a = read_gftm(in);
    f.b = read_gftm(in);
    factors.push_back(std::move(f));
  }
  return AdapterGroup::restore_lora(name, layers, d_out, d_in, spec, std::move(factors));
}

}  // namespace

std::string checkpoint_manifest(const std::vector<AdapterGroup>& groups, std::uint64_t seed) {
  json j;
  j["format"] = kMagic;
  j["seed"] = seed;
  j["groups"] = json::array();
  for (const AdapterGroup& g : groups) j["groups"].push_back(group_manifest(g));
  return j.dump(2);
}

void write_checkpoint(std::ostream& out, const std::vector<AdapterGroup>& groups,
                      std::uint64_t seed) {
  const std::string manifest = checkpoint_manifest(groups, seed);
  out.write(kMagic, kMagicLen);
  put_u32(out, static_cast<std::uint32_t>(manifest.size()));
  out.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
  for (const AdapterGroup& g : groups)
    for (const Matrix* m : g.parameter_values()) write_gftm(out, *m);
  if (!out) throw IoError("checkpoint: write failed");
}

void save_checkpoint(const std::string& path, const std::vector<AdapterGroup>& groups,
                     std::uint64_t seed) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_checkpoint(out, groups, seed);
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[kMagicLen];
  if (!in.read(magic, kMagicLen) || std::string(magic, kMagicLen) != kMagic)
    throw IoError("checkpoint: bad magic bytes");
  const std::uint32_t length = get_u32(in);
  std::string text(length, '\0');
  if (!in.read(text.data(), length)) throw IoError("checkpoint: truncated manifest");
  json manifest;
  try {
    manifest = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("checkpoint: manifest is not valid JSON: ") + e.what());
  }
  Checkpoint ck;
  ck.seed = field<std::uint64_t>(manifest, "seed");
  for (const json& g : manifest.at("groups")) ck.groups.push_back(read_group(in, g));
  return ck;
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return read_checkpoint(in);
}

}  // namespace genft
