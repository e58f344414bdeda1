#pragma once

#include "curvedit/matrix.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace curvedit {

using Json = nlohmann::json;

/// Architecture descriptor for both model kinds.
struct ArchSpec {
  enum class Kind { Classifier, Lm };
  Kind kind = Kind::Lm;

  // lm
  std::size_t vocab = 64;
  std::size_t context = 96;
  std::size_t n_layers = 4;
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t d_mlp = 128;

  // classifier
  std::size_t input_dim = 32;
  std::size_t n_classes = 8;
  std::size_t d_hidden = 32;
  std::size_t n_blocks = 3;  // gated MLP blocks; d_mlp is reused as block width

  void validate() const;
  Json to_json() const;
  static ArchSpec from_json(const Json& j);
};

struct TrainMeta {
  std::size_t steps = 0;
  std::uint64_t seed = 0;
  double weight_decay = 0.0;
  double learning_rate = 0.0;

  Json to_json() const;
  static TrainMeta from_json(const Json& j);
};

/// Named ordered set of weight matrices plus architecture and training
/// metadata. Tensor order is fixed by the architecture so serialized
/// checkpoints are byte-stable.
struct ModelCheckpoint {
  ArchSpec arch;
  TrainMeta train_meta;
  std::vector<std::pair<std::string, Matrix>> tensors;

  Matrix& tensor(const std::string& name);
  const Matrix& tensor(const std::string& name) const;
  bool has_tensor(const std::string& name) const;
  std::size_t param_count() const;
};

/// Generic header+payload container: one UTF-8 JSON header line holding
/// arbitrary metadata plus a tensor manifest (name, rows, cols, byte
/// offset), then "\n", then concatenated row-major little-endian float32
/// payloads in manifest order.
struct Container {
  Json header;
  std::vector<std::pair<std::string, Matrix>> tensors;

  const Matrix& tensor(const std::string& name) const;
};

/// Writes atomically (temp file in the same directory, then rename).
void save_container(const std::string& path, const Json& header_extra,
                    const std::vector<std::pair<std::string, Matrix>>& tensors);
Container load_container(const std::string& path);

void save_checkpoint(const std::string& path, const ModelCheckpoint& ckpt);
ModelCheckpoint load_checkpoint(const std::string& path);

/// Allocates the tensor list for an architecture, all zeros, in canonical
/// order. Names: "embed", "pos" (lm), "layer{i}.attn.{wq,wk,wv,wo}" (lm),
/// "layer{i}.{gate,up,down}", "unembed" (lm) / "head" (classifier).
ModelCheckpoint make_zero_checkpoint(const ArchSpec& arch);

}  // namespace curvedit
