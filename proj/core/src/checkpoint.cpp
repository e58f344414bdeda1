#include "curvedit/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace curvedit {

void ArchSpec::validate() const {
  if (kind == Kind::Lm) {
    if (vocab < 2 || context < 2 || n_layers < 1 || d_model < 1 || n_heads < 1 || d_mlp < 1)
      throw std::invalid_argument("ArchSpec: lm dims out of range");
    if (d_model % n_heads != 0)
      throw std::invalid_argument("ArchSpec: d_model not divisible by n_heads");
  } else {
    if (input_dim < 1 || n_classes < 2 || d_hidden < 1 || n_blocks < 1 || d_mlp < 1)
      throw std::invalid_argument("ArchSpec: classifier dims out of range");
  }
}

Json ArchSpec::to_json() const {
  Json j;
  if (kind == Kind::Lm) {
    j["kind"] = "lm";
    j["vocab"] = vocab;
    j["context"] = context;
    j["n_layers"] = n_layers;
    j["d_model"] = d_model;
    j["n_heads"] = n_heads;
    j["d_mlp"] = d_mlp;
  } else {
    j["kind"] = "classifier";
    j["input_dim"] = input_dim;
    j["n_classes"] = n_classes;
    j["d_hidden"] = d_hidden;
    j["n_blocks"] = n_blocks;
    j["d_mlp"] = d_mlp;
  }
  return j;
}

ArchSpec ArchSpec::from_json(const Json& j) {
  ArchSpec a;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "lm") {
    a.kind = Kind::Lm;
    a.vocab = j.at("vocab").get<std::size_t>();
    a.context = j.at("context").get<std::size_t>();
    a.n_layers = j.at("n_layers").get<std::size_t>();
    a.d_model = j.at("d_model").get<std::size_t>();
    a.n_heads = j.at("n_heads").get<std::size_t>();
    a.d_mlp = j.at("d_mlp").get<std::size_t>();
  } else if (kind == "classifier") {
    a.kind = Kind::Classifier;
    a.input_dim = j.at("input_dim").get<std::size_t>();
    a.n_classes = j.at("n_classes").get<std::size_t>();
    a.d_hidden = j.at("d_hidden").get<std::size_t>();
    a.n_blocks = j.at("n_blocks").get<std::size_t>();
    a.d_mlp = j.at("d_mlp").get<std::size_t>();
  } else {
    throw std::invalid_argument("ArchSpec: unknown kind " + kind);
  }
  a.validate();
  return a;
}

Json TrainMeta::to_json() const {
  return Json{{"steps", steps},
              {"seed", seed},
              {"weight_decay", weight_decay},
              {"learning_rate", learning_rate}};
}

TrainMeta TrainMeta::from_json(const Json& j) {
  TrainMeta m;
  m.steps = j.value("steps", std::size_t{0});
  m.seed = j.value("seed", std::uint64_t{0});
  m.weight_decay = j.value("weight_decay", 0.0);
  m.learning_rate = j.value("learning_rate", 0.0);
  return m;
}

namespace {

template <typename List>
auto* find_tensor(List& tensors, const std::string& name) {
  for (auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return static_cast<decltype(&tensors.front().second)>(nullptr);
}

}  // namespace

Matrix& ModelCheckpoint::tensor(const std::string& name) {
  if (auto* t = find_tensor(tensors, name)) return *t;
  throw std::out_of_range("ModelCheckpoint: no tensor " + name);
}

const Matrix& ModelCheckpoint::tensor(const std::string& name) const {
  if (const auto* t = find_tensor(tensors, name)) return *t;
  throw std::out_of_range("ModelCheckpoint: no tensor " + name);
}

bool ModelCheckpoint::has_tensor(const std::string& name) const {
  return find_tensor(tensors, name) != nullptr;
}

std::size_t ModelCheckpoint::param_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors) n += t.size();
  return n;
}

const Matrix& Container::tensor(const std::string& name) const {
  if (const auto* t = find_tensor(tensors, name)) return *t;
  throw std::out_of_range("Container: no tensor " + name);
}

void save_container(const std::string& path, const Json& header_extra,
                    const std::vector<std::pair<std::string, Matrix>>& tensors) {
  Json header = header_extra;
  Json manifest = Json::array();
  std::size_t offset = 0;
  for (const auto& [name, t] : tensors) {
    manifest.push_back(
        {{"name", name}, {"rows", t.rows()}, {"cols", t.cols()}, {"offset", offset}});
    offset += t.size() * sizeof(float);
  }
  header["tensors"] = std::move(manifest);

  const std::filesystem::path target(path);
  const std::filesystem::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("save_container: cannot open " + tmp.string());
    out << header.dump() << "\n";
    std::vector<float> buf;
    for (const auto& [name, t] : tensors) {
      buf.resize(t.size());
      for (std::size_t i = 0; i < t.size(); ++i) buf[i] = static_cast<float>(t.data()[i]);
      out.write(reinterpret_cast<const char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(float)));
    }
    if (!out) throw std::runtime_error("save_container: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

Container load_container(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_container: cannot open " + path);
  std::string header_line;
  if (!std::getline(in, header_line))
    throw std::runtime_error("load_container: missing header in " + path);
  Container c;
  c.header = Json::parse(header_line);
  const std::streampos payload_start = in.tellg();
  for (const auto& entry : c.header.at("tensors")) {
    const std::size_t rows = entry.at("rows").get<std::size_t>();
    const std::size_t cols = entry.at("cols").get<std::size_t>();
    const std::size_t offset = entry.at("offset").get<std::size_t>();
    in.seekg(payload_start + static_cast<std::streamoff>(offset));
    std::vector<float> buf(rows * cols);
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!in) throw std::runtime_error("load_container: truncated payload in " + path);
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = static_cast<double>(buf[i]);
    c.tensors.emplace_back(entry.at("name").get<std::string>(), std::move(m));
  }
  return c;
}

void save_checkpoint(const std::string& path, const ModelCheckpoint& ckpt) {
  Json header;
  header["arch"] = ckpt.arch.to_json();
  header["train_meta"] = ckpt.train_meta.to_json();
  save_container(path, header, ckpt.tensors);
}

ModelCheckpoint load_checkpoint(const std::string& path) {
  Container c = load_container(path);
  ModelCheckpoint ckpt;
  ckpt.arch = ArchSpec::from_json(c.header.at("arch"));
  ckpt.train_meta = TrainMeta::from_json(c.header.value("train_meta", Json::object()));
  ckpt.tensors = std::move(c.tensors);
  return ckpt;
}

ModelCheckpoint make_zero_checkpoint(const ArchSpec& arch) {
  arch.validate();
  ModelCheckpoint ckpt;
  ckpt.arch = arch;
  auto& t = ckpt.tensors;
  if (arch.kind == ArchSpec::Kind::Lm) {
    t.emplace_back("embed", Matrix(arch.vocab, arch.d_model));
    t.emplace_back("pos", Matrix(arch.context, arch.d_model));
    for (std::size_t i = 0; i < arch.n_layers; ++i) {
      const std::string p = "layer" + std::to_string(i) + ".";
      t.emplace_back(p + "attn.wq", Matrix(arch.d_model, arch.d_model));
      t.emplace_back(p + "attn.wk", Matrix(arch.d_model, arch.d_model));
      t.emplace_back(p + "attn.wv", Matrix(arch.d_model, arch.d_model));
      t.emplace_back(p + "attn.wo", Matrix(arch.d_model, arch.d_model));
      t.emplace_back(p + "gate", Matrix(arch.d_mlp, arch.d_model));
      t.emplace_back(p + "up", Matrix(arch.d_mlp, arch.d_model));
      t.emplace_back(p + "down", Matrix(arch.d_model, arch.d_mlp));
    }
    t.emplace_back("unembed", Matrix(arch.vocab, arch.d_model));
  } else {
    t.emplace_back("embed", Matrix(arch.d_hidden, arch.input_dim));
    for (std::size_t i = 0; i < arch.n_blocks; ++i) {
      const std::string p = "layer" + std::to_string(i) + ".";
      t.emplace_back(p + "gate", Matrix(arch.d_mlp, arch.d_hidden));
      t.emplace_back(p + "up", Matrix(arch.d_mlp, arch.d_hidden));
      t.emplace_back(p + "down", Matrix(arch.d_hidden, arch.d_mlp));
    }
    t.emplace_back("head", Matrix(arch.n_classes, arch.d_hidden));
  }
  return ckpt;
}

}  // namespace curvedit
