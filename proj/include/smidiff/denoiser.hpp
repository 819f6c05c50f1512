//
// SPDX-License-Identifier: Apache-2.0
//

#ifndef SMIDIFF_DENOISER_HPP_
#define SMIDIFF_DENOISER_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "smidiff/tensor.hpp"

namespace smidiff {

struct ModelConfig {
  int vocab_size = 0;       // SMILES tokens
  int text_vocab_size = 0;  // description words
  int d = 32;               // token embedding width
  int n = 32;               // padded sequence length
  int d1 = 64;              // text embedding width
  int d2 = 128;             // transformer width
  int layers = 2;
  int heads = 4;
  int ffn_mult = 4;
  int max_text_len = 128;
  int max_timestep = 2000;  // largest t fed to the step embedding
  bool freeze_text_encoder = false;

  // Desk-scale defaults (d2 = 128, L = 2, 4 heads).
  static ModelConfig desk();
  // Full configuration (n = 256, d2 = 1024, L = 12, 8 heads, d1 = 768).
  static ModelConfig full();

  // Throws InvalidArgument on inconsistent sizes.
  void check() const;

  bool operator==(const ModelConfig &) const = default;
};

template <class S>
struct NamedParameter {
  std::string name;
  Tensor<S> tensor;
};

// Text condition: C (B, m, d1) plus a B * m key mask.
template <class S>
struct TextBatch {
  Tensor<S> embeddings;
  std::vector<std::uint8_t> mask;

  std::int64_t batch() const { return embeddings.dim(0); }
  std::int64_t length() const { return embeddings.dim(1); }
};

// Transformer x0-predictor with sinusoidal step embedding, bidirectional
// self-attention and text cross-attention, plus the word-level text
// encoder and the shared token embedding table.
template <class S>
class Denoiser {
 public:
  Denoiser(const ModelConfig &config, std::uint64_t seed);

  const ModelConfig &config() const { return config_; }

  std::vector<NamedParameter<S>> &parameters() { return params_; }
  const std::vector<NamedParameter<S>> &parameters() const { return params_; }
  std::vector<Tensor<S>> parameter_tensors() const;

  // Throws std::out_of_range for unknown names.
  const Tensor<S> &parameter(const std::string &name) const;

  // Token embedding table Emb, (vocab, d).
  const Tensor<S> &embedding_table() const { return parameter("emb"); }

  // Word ids per description, right-padded to the longest; ids outside the
  // text vocabulary throw IdOutOfRange.
  TextBatch<S> encode_text(
      std::span<const std::vector<std::int32_t>> word_ids) const;

  // xt (B, n, d), one timestep per example, optional text -> x0 prediction
  // (B, n, d).
  Tensor<S> predict(const Tensor<S> &xt, std::span<const int> timesteps,
                    const TextBatch<S> *text) const;

  // Building blocks, exposed for verification.
  Tensor<S> step_embedding(std::span<const int> timesteps) const;
  Tensor<S> text_projection(const Tensor<S> &text_embeddings) const;
  Tensor<S> self_attention(int layer, const Tensor<S> &h) const;
  Tensor<S> cross_attention(int layer, const Tensor<S> &h,
                            const Tensor<S> &text_hidden,
                            const std::vector<std::uint8_t> &mask) const;
  Tensor<S> feed_forward(int layer, const Tensor<S> &h) const;

  // Names of parameters that only the text path touches.
  bool is_text_parameter(const std::string &name) const;

 private:
  Tensor<S> &add_param(const std::string &name, Shape shape, double stddev,
                       std::uint64_t &stream, double fill = 0.0);
  Tensor<S> linear(const Tensor<S> &x, const std::string &prefix) const;
  Tensor<S> attention(const std::string &prefix, const Tensor<S> &query_src,
                      const Tensor<S> &key_src,
                      const std::vector<std::uint8_t> *mask) const;
  Tensor<S> norm(const Tensor<S> &x, const std::string &prefix) const;

  ModelConfig config_;
  std::vector<NamedParameter<S>> params_;
  std::uint64_t seed_;
};

// Sinusoidal encoding of integer steps, (B, width).
template <class S>
std::vector<S> sinusoidal_encoding(std::span<const int> timesteps, int width);

}  // namespace smidiff

#endif  // SMIDIFF_DENOISER_HPP_
