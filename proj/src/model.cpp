#include "alti/model.hpp"

#include "json.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <random>

namespace alti {
namespace {

using nlohmann::json;

constexpr const char* kManifest = "manifest.json";
constexpr const char* kTensors = "tensors.bin";
constexpr const char* kVocab = "vocab.txt";
constexpr int kFormatVersion = 1;

std::vector<std::int64_t> shape_of(const Matrix& m) { return {m.rows(), m.cols()}; }
std::vector<std::int64_t> shape_of(const Vector& v) { return {v.size()}; }

std::string shape_text(const std::vector<std::int64_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    s += (i ? "x" : "") + std::to_string(shape[i]);
  }
  return s + "]";
}

void append_le(std::string& buf, float f) {
  const auto u = std::bit_cast<std::uint32_t>(f);
  char bytes[4];
  for (int b = 0; b < 4; ++b) {
    bytes[b] = static_cast<char>((u >> (8 * b)) & 0xFFu);
  }
  buf.append(bytes, 4);
}

float read_le(const unsigned char* p) {
  const std::uint32_t u = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                          (static_cast<std::uint32_t>(p[2]) << 16) |
                          (static_cast<std::uint32_t>(p[3]) << 24);
  return std::bit_cast<float>(u);
}

std::uint32_t crc_of(const char* data, std::size_t n) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(data), static_cast<uInt>(n)));
}

const char* activation_name(Activation a) { return a == Activation::gelu ? "gelu" : "relu"; }

Activation parse_activation(const std::string& s) {
  if (s == "gelu") return Activation::gelu;
  if (s == "relu") return Activation::relu;
  throw BundleError("unknown activation '" + s + "'");
}

json config_to_json(const ModelConfig& c) {
  return json{{"num_layers", c.num_layers},
              {"hidden_size", c.hidden},
              {"num_heads", c.heads},
              {"ffn_dim", c.ffn_dim},
              {"vocab_size", c.vocab_size},
              {"max_positions", c.max_positions},
              {"type_vocab_size", c.type_vocab_size},
              {"num_classes", c.num_classes},
              {"ln_eps", c.ln_eps},
              {"activation", activation_name(c.activation)},
              {"lowercase", c.lowercase},
              {"special_tokens",
               {{"cls", c.special.cls},
                {"sep", c.special.sep},
                {"mask", c.special.mask},
                {"unk", c.special.unk},
                {"pad", c.special.pad}}}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  try {
    c.num_layers = j.at("num_layers").get<int>();
    c.hidden = j.at("hidden_size").get<int>();
    c.heads = j.at("num_heads").get<int>();
    c.ffn_dim = j.at("ffn_dim").get<int>();
    c.vocab_size = j.at("vocab_size").get<int>();
    c.max_positions = j.at("max_positions").get<int>();
    c.type_vocab_size = j.value("type_vocab_size", 1);
    c.num_classes = j.at("num_classes").get<int>();
    c.ln_eps = j.value("ln_eps", 1e-12);
    c.activation = parse_activation(j.value("activation", std::string("gelu")));
    c.lowercase = j.value("lowercase", true);
    const json& sp = j.at("special_tokens");
    c.special.cls = sp.at("cls").get<int>();
    c.special.sep = sp.at("sep").get<int>();
    c.special.mask = sp.at("mask").get<int>();
    c.special.unk = sp.at("unk").get<int>();
    c.special.pad = sp.at("pad").get<int>();
  } catch (const json::exception& e) {
    throw BundleError(std::string("manifest config: ") + e.what());
  }
  return c;
}

}  // namespace

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw BundleError("invalid config: " + msg); };
  if (num_layers < 1) fail("num_layers must be >= 1");
  if (hidden < 2) fail("hidden_size must be >= 2");
  if (heads < 1) fail("num_heads must be >= 1");
  if (hidden % heads != 0) {
    fail("hidden_size " + std::to_string(hidden) + " is not divisible by num_heads " +
         std::to_string(heads));
  }
  if (ffn_dim < 1) fail("ffn_dim must be >= 1");
  if (vocab_size < 1) fail("vocab_size must be >= 1");
  if (max_positions < 2) fail("max_positions must be >= 2");
  if (type_vocab_size < 1) fail("type_vocab_size must be >= 1");
  if (num_classes < 1) fail("num_classes must be >= 1");
  if (!(ln_eps >= 0.0)) fail("ln_eps must be non-negative");
  for (auto [name, id] : {std::pair{"cls", special.cls}, std::pair{"sep", special.sep},
                          std::pair{"mask", special.mask}, std::pair{"unk", special.unk},
                          std::pair{"pad", special.pad}}) {
    if (id < 0 || id >= vocab_size) {
      fail(std::string("special token '") + name + "' id " + std::to_string(id) +
           " outside vocab");
    }
  }
}

ModelBundle make_zero_bundle(const ModelConfig& config, Vocab vocab) {
  config.validate();
  const int d = config.hidden;
  const int dh = config.head_dim();
  ModelBundle b;
  b.config = config;
  b.vocab = std::move(vocab);
  b.embeddings.word = Matrix::Zero(config.vocab_size, d);
  b.embeddings.position = Matrix::Zero(config.max_positions, d);
  b.embeddings.segment = Matrix::Zero(config.type_vocab_size, d);
  b.embeddings.ln_gamma = Vector::Ones(d);
  b.embeddings.ln_beta = Vector::Zero(d);
  b.layers.resize(static_cast<std::size_t>(config.num_layers));
  for (auto& layer : b.layers) {
    layer.heads.resize(static_cast<std::size_t>(config.heads));
    for (auto& h : layer.heads) {
      h.query = Matrix::Zero(dh, d);
      h.query_bias = Vector::Zero(dh);
      h.key = Matrix::Zero(dh, d);
      h.key_bias = Vector::Zero(dh);
      h.value = Matrix::Zero(dh, d);
      h.value_bias = Vector::Zero(dh);
      h.output = Matrix::Zero(d, dh);
    }
    layer.output_bias = Vector::Zero(d);
    layer.ln1_gamma = Vector::Ones(d);
    layer.ln1_beta = Vector::Zero(d);
    layer.ffn_in = Matrix::Zero(config.ffn_dim, d);
    layer.ffn_in_bias = Vector::Zero(config.ffn_dim);
    layer.ffn_out = Matrix::Zero(d, config.ffn_dim);
    layer.ffn_out_bias = Vector::Zero(d);
    layer.ln2_gamma = Vector::Ones(d);
    layer.ln2_beta = Vector::Zero(d);
  }
  b.head.pooler = Matrix::Zero(d, d);
  b.head.pooler_bias = Vector::Zero(d);
  b.head.classifier = Matrix::Zero(config.num_classes, d);
  b.head.classifier_bias = Vector::Zero(config.num_classes);
  return b;
}

void ModelBundle::validate() const {
  config.validate();
  if (vocab.size() != config.vocab_size) {
    throw BundleError("vocab has " + std::to_string(vocab.size()) + " entries, config says " +
                      std::to_string(config.vocab_size));
  }
  if (static_cast<int>(layers.size()) != config.num_layers) {
    throw BundleError("bundle has " + std::to_string(layers.size()) + " layers, config says " +
                      std::to_string(config.num_layers));
  }
  for (const auto& layer : layers) {
    if (static_cast<int>(layer.heads.size()) != config.heads) {
      throw BundleError("layer head count disagrees with config");
    }
  }
  const ModelBundle expected = make_zero_bundle(config, Vocab{});
  std::map<std::string, std::vector<std::int64_t>> want;
  for_each_tensor(expected, [&](const std::string& name, const auto& t) { want[name] = shape_of(t); });
  for_each_tensor(*this, [&](const std::string& name, const auto& t) {
    if (shape_of(t) != want.at(name)) {
      throw BundleError("tensor '" + name + "' has shape " + shape_text(shape_of(t)) +
                        ", expected " + shape_text(want.at(name)));
    }
    if (!t.allFinite()) {
      throw BundleError("tensor '" + name + "' contains non-finite values");
    }
  });
}

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& dir) {
  bundle.validate();
  std::filesystem::create_directories(dir);
  std::string blob;
  json index = json::array();
  for_each_tensor(bundle, [&](const std::string& name, const auto& t) {
    const std::size_t offset = blob.size();
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      // matrices are row-major: linear index order is file order
      append_le(blob, static_cast<float>(t.data()[i]));
    }
    index.push_back({{"name", name},
                     {"shape", shape_of(t)},
                     {"dtype", "float32"},
                     {"offset", offset},
                     {"crc32", crc_of(blob.data() + offset, blob.size() - offset)}});
  });
  const json manifest{{"format", "alti-bundle"},
                      {"format_version", kFormatVersion},
                      {"config", config_to_json(bundle.config)},
                      {"tensors", index}};
  {
    std::ofstream out(dir / kTensors, std::ios::binary);
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw BundleError("failed writing " + (dir / kTensors).string());
  }
  {
    std::ofstream out(dir / kManifest, std::ios::binary);
    out << manifest.dump(2) << '\n';
    if (!out) throw BundleError("failed writing " + (dir / kManifest).string());
  }
  bundle.vocab.save(dir / kVocab);
}

ModelBundle load_bundle(const std::filesystem::path& dir) {
  for (const char* f : {kManifest, kTensors, kVocab}) {
    if (!std::filesystem::exists(dir / f)) {
      throw BundleError("bundle " + dir.string() + " is missing " + f);
    }
  }
  json manifest;
  try {
    std::ifstream in(dir / kManifest);
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw BundleError(std::string("cannot parse manifest.json: ") + e.what());
  }
  const ModelConfig config = config_from_json(manifest.at("config"));
  Vocab vocab = Vocab::load(dir / kVocab);
  if (vocab.size() != config.vocab_size) {
    throw BundleError("vocab.txt has " + std::to_string(vocab.size()) + " lines, config says " +
                      std::to_string(config.vocab_size));
  }

  std::string blob;
  {
    std::ifstream in(dir / kTensors, std::ios::binary);
    blob.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }

  std::map<std::string, json> entries;
  for (const json& e : manifest.at("tensors")) {
    entries[e.at("name").get<std::string>()] = e;
  }

  ModelBundle bundle = make_zero_bundle(config, std::move(vocab));
  for_each_tensor(bundle, [&](const std::string& name, auto& t) {
    auto it = entries.find(name);
    if (it == entries.end()) {
      throw BundleError("missing tensor '" + name + "'");
    }
    const json& e = it->second;
    const auto shape = e.at("shape").get<std::vector<std::int64_t>>();
    if (shape != shape_of(t)) {
      throw BundleError("tensor '" + name + "' has shape " + shape_text(shape) + ", expected " +
                        shape_text(shape_of(t)));
    }
    if (e.value("dtype", std::string("float32")) != "float32") {
      throw BundleError("tensor '" + name + "' has unsupported dtype");
    }
    const auto offset = e.at("offset").get<std::size_t>();
    const std::size_t bytes = static_cast<std::size_t>(t.size()) * 4;
    if (offset + bytes > blob.size()) {
      throw BundleError("tensor '" + name + "' extends past the end of tensors.bin");
    }
    if (e.contains("crc32") && e.at("crc32").get<std::uint32_t>() != crc_of(blob.data() + offset, bytes)) {
      throw BundleError("checksum failure for tensor '" + name + "'");
    }
    const auto* p = reinterpret_cast<const unsigned char*>(blob.data() + offset);
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      t.data()[i] = static_cast<double>(read_le(p + 4 * i));
    }
    if (!t.allFinite()) {
      throw BundleError("tensor '" + name + "' contains non-finite values");
    }
    entries.erase(it);
  });
  if (!entries.empty()) {
    throw BundleError("unexpected tensor '" + entries.begin()->first + "' in manifest");
  }
  return bundle;
}

ModelConfig fixture_config(int num_layers, int hidden, int heads, int ffn_dim) {
  ModelConfig c;
  c.num_layers = num_layers;
  c.hidden = hidden;
  c.heads = heads;
  c.ffn_dim = ffn_dim;
  c.vocab_size = fixture_vocab().size();
  c.max_positions = 64;
  c.num_classes = 2;
  return c;
}

ModelBundle generate_fixture_bundle(const ModelConfig& config, std::uint64_t seed) {
  const Vocab& base = fixture_vocab();
  if (config.vocab_size < base.size()) {
    throw BundleError("fixture bundles need vocab_size >= " + std::to_string(base.size()));
  }
  std::vector<std::string> tokens = base.tokens();
  for (int i = base.size(); i < config.vocab_size; ++i) {
    tokens.push_back("[unused" + std::to_string(i - base.size()) + "]");
  }
  ModelBundle b = make_zero_bundle(config, Vocab(std::move(tokens)));

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.02);
  for_each_tensor(b, [&](const std::string& name, auto& t) {
    if (name.ends_with(".gamma") || name.ends_with(".beta")) {
      return;
    }
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      // Rounded to float32 so save/load is the identity on the in-memory bundle.
      t.data()[i] = static_cast<double>(static_cast<float>(normal(rng)));
    }
  });
  return b;
}

}  // namespace alti
