//
// SPDX-License-Identifier: Apache-2.0
//

#include "smidiff/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "smidiff/errors.hpp"
#include "smidiff/rng.hpp"

namespace smidiff {

ModelConfig ModelConfig::desk() {
  ModelConfig c;
  c.d = 32;
  c.n = 32;
  c.d1 = 64;
  c.d2 = 128;
  c.layers = 2;
  c.heads = 4;
  return c;
}

ModelConfig ModelConfig::full() {
  ModelConfig c;
  c.d = 32;
  c.n = 256;
  c.d1 = 768;
  c.d2 = 1024;
  c.layers = 12;
  c.heads = 8;
  return c;
}

void ModelConfig::check() const {
  auto fail = [](const std::string &msg) { throw InvalidArgument(msg); };
  if (vocab_size < 5)
    fail("vocab_size must include the specials and at least one token");
  if (text_vocab_size < 2)
    fail("text_vocab_size must include [PAD] and [UNK]");
  if (d < 1 || n < 3 || d1 < 1 || d2 < 2 || layers < 1 || heads < 1
      || ffn_mult < 1 || max_text_len < 1 || max_timestep < 1)
    fail("model dimensions must be positive");
  if (d2 % heads != 0)
    fail("d2 must be divisible by the number of heads");
  if (d2 % 2 != 0)
    fail("d2 must be even for the sinusoidal step embedding");
}

template <class S>
std::vector<S> sinusoidal_encoding(std::span<const int> timesteps,
                                   int width) {
  const int half = width / 2;
  std::vector<S> out(timesteps.size() * width, S(0));
  for (std::size_t b = 0; b < timesteps.size(); ++b) {
    for (int i = 0; i < half; ++i) {
      double freq = std::exp(-std::log(10000.0) * i / half);
      double arg = timesteps[b] * freq;
      out[b * width + i] = static_cast<S>(std::sin(arg));
      out[b * width + half + i] = static_cast<S>(std::cos(arg));
    }
  }
  return out;
}

template <class S>
Tensor<S> &Denoiser<S>::add_param(const std::string &name, Shape shape,
                                  double stddev, std::uint64_t &stream,
                                  double fill) {
  std::vector<S> data(shape_numel(shape), static_cast<S>(fill));
  if (stddev > 0.0) {
    Rng rng(Rng::splitmix(seed_ ^ Rng::splitmix(++stream)));
    for (auto &v: data)
      v = static_cast<S>(stddev * rng.normal());
  }
  params_.push_back(
      { name, Tensor<S>::from_data(std::move(shape), std::move(data), true) });
  return params_.back().tensor;
}

template <class S>
Denoiser<S>::Denoiser(const ModelConfig &config, std::uint64_t seed)
    : config_(config), seed_(seed) {
  config_.check();
  const auto &c = config_;
  const std::int64_t d2 = c.d2, ff = c.d2 * c.ffn_mult;
  const double w2 = 1.0 / std::sqrt(static_cast<double>(d2));
  const double wff = 1.0 / std::sqrt(static_cast<double>(ff));
  const double residual = 1.0 / std::sqrt(2.0 * c.layers);
  std::uint64_t stream = 0;

  add_param("emb", { c.vocab_size, c.d }, 1.0, stream);
  add_param("in.w", { c.d, d2 }, 1.0 / std::sqrt(static_cast<double>(c.d)),
            stream);
  add_param("in.b", { d2 }, 0.0, stream);
  add_param("pos_emb", { c.n, d2 }, 1.0, stream);
  add_param("step.w1", { d2, d2 }, w2, stream);
  add_param("step.b1", { d2 }, 0.0, stream);
  add_param("step.w2", { d2, d2 }, w2, stream);
  add_param("step.b2", { d2 }, 0.0, stream);

  add_param("text.word_emb", { c.text_vocab_size, c.d1 }, 1.0, stream);
  add_param("text.pos_emb", { c.max_text_len, c.d1 }, 1.0, stream);
  add_param("text.w1", { c.d1, d2 },
            1.0 / std::sqrt(static_cast<double>(c.d1)), stream);
  add_param("text.b1", { d2 }, 0.0, stream);
  add_param("text.w2", { d2, d2 }, w2, stream);
  add_param("text.b2", { d2 }, 0.0, stream);

  for (int l = 0; l < c.layers; ++l) {
    const std::string p = "layers." + std::to_string(l) + ".";
    for (const char *ln: { "ln1", "ln2", "ln3" }) {
      add_param(p + ln + ".g", { d2 }, 0.0, stream, 1.0);
      add_param(p + ln + ".b", { d2 }, 0.0, stream);
    }
    for (const char *blk: { "self", "cross" }) {
      for (const char *m: { "q", "k", "v", "o" }) {
        double sd = std::string(m) == "o" ? w2 * residual : w2;
        add_param(p + blk + ".w" + m, { d2, d2 }, sd, stream);
        add_param(p + blk + ".b" + m, { d2 }, 0.0, stream);
      }
    }
    add_param(p + "mlp.w1", { d2, ff }, w2, stream);
    add_param(p + "mlp.b1", { ff }, 0.0, stream);
    add_param(p + "mlp.w2", { ff, d2 }, wff * residual, stream);
    add_param(p + "mlp.b2", { d2 }, 0.0, stream);
  }
  add_param("ln_f.g", { d2 }, 0.0, stream, 1.0);
  add_param("ln_f.b", { d2 }, 0.0, stream);
  add_param("head.w", { d2, c.d }, w2, stream);
  add_param("head.b", { c.d }, 0.0, stream);
}

template <class S>
std::vector<Tensor<S>> Denoiser<S>::parameter_tensors() const {
  std::vector<Tensor<S>> out;
  out.reserve(params_.size());
  for (const auto &p: params_)
    out.push_back(p.tensor);
  return out;
}

template <class S>
const Tensor<S> &Denoiser<S>::parameter(const std::string &name) const {
  for (const auto &p: params_)
    if (p.name == name)
      return p.tensor;
  throw std::out_of_range("no parameter named '" + name + "'");
}

template <class S>
bool Denoiser<S>::is_text_parameter(const std::string &name) const {
  return name.rfind("text.", 0) == 0
         || name.find(".cross.") != std::string::npos
         || name.find(".ln2.") != std::string::npos;
}

template <class S>
Tensor<S> Denoiser<S>::linear(const Tensor<S> &x,
                              const std::string &prefix) const {
  // prefix like "layers.0.self.q" -> weight ".wq", bias ".bq"
  auto dot = prefix.rfind('.');
  std::string head = prefix.substr(0, dot + 1);
  std::string tail = prefix.substr(dot + 1);
  return add(matmul(x, parameter(head + "w" + tail)),
             parameter(head + "b" + tail));
}

template <class S>
Tensor<S> Denoiser<S>::norm(const Tensor<S> &x,
                            const std::string &prefix) const {
  return layer_norm(x, parameter(prefix + ".g"), parameter(prefix + ".b"));
}

template <class S>
Tensor<S> Denoiser<S>::attention(const std::string &prefix,
                                 const Tensor<S> &query_src,
                                 const Tensor<S> &key_src,
                                 const std::vector<std::uint8_t> *mask) const {
  const std::int64_t b = query_src.dim(0);
  const std::int64_t nq = query_src.dim(1);
  const std::int64_t nk = key_src.dim(1);
  const std::int64_t h = config_.heads;
  const std::int64_t dh = config_.d2 / h;

  auto split_heads = [&](const Tensor<S> &x, std::int64_t len) {
    return transpose(reshape(x, { b, len, h, dh }), 1, 2);
  };
  Tensor<S> q = split_heads(linear(query_src, prefix + ".q"), nq);
  Tensor<S> k = split_heads(linear(key_src, prefix + ".k"), nk);
  Tensor<S> v = split_heads(linear(key_src, prefix + ".v"), nk);

  Tensor<S> scores =
      scale(matmul(q, k, false, true), static_cast<S>(1.0 / std::sqrt(dh)));
  Tensor<S> probs = mask ? masked_softmax(scores, *mask) : softmax(scores, -1);
  Tensor<S> ctx = reshape(transpose(matmul(probs, v), 1, 2),
                          { b, nq, config_.d2 });
  return linear(ctx, prefix + ".o");
}

template <class S>
Tensor<S> Denoiser<S>::self_attention(int layer, const Tensor<S> &h) const {
  return attention("layers." + std::to_string(layer) + ".self", h, h,
                   nullptr);
}

template <class S>
Tensor<S> Denoiser<S>::cross_attention(
    int layer, const Tensor<S> &h, const Tensor<S> &text_hidden,
    const std::vector<std::uint8_t> &mask) const {
  return attention("layers." + std::to_string(layer) + ".cross", h,
                   text_hidden, &mask);
}

template <class S>
Tensor<S> Denoiser<S>::feed_forward(int layer, const Tensor<S> &h) const {
  const std::string p = "layers." + std::to_string(layer) + ".mlp.";
  Tensor<S> hidden =
      gelu(add(matmul(h, parameter(p + "w1")), parameter(p + "b1")));
  return add(matmul(hidden, parameter(p + "w2")), parameter(p + "b2"));
}

template <class S>
Tensor<S> Denoiser<S>::step_embedding(std::span<const int> timesteps) const {
  for (int t: timesteps)
    if (t < 0 || t > config_.max_timestep)
      throw StepOutOfRange("timestep " + std::to_string(t) + " outside [0, "
                           + std::to_string(config_.max_timestep) + "]");
  const auto b = static_cast<std::int64_t>(timesteps.size());
  Tensor<S> enc = Tensor<S>::from_data(
      { b, config_.d2 }, sinusoidal_encoding<S>(timesteps, config_.d2));
  Tensor<S> hidden = gelu(
      add(matmul(enc, parameter("step.w1")), parameter("step.b1")));
  return add(matmul(hidden, parameter("step.w2")), parameter("step.b2"));
}

template <class S>
Tensor<S> Denoiser<S>::text_projection(const Tensor<S> &text_embeddings) const {
  Tensor<S> hidden = gelu(add(matmul(text_embeddings, parameter("text.w1")),
                              parameter("text.b1")));
  return add(matmul(hidden, parameter("text.w2")), parameter("text.b2"));
}

template <class S>
TextBatch<S> Denoiser<S>::encode_text(
    std::span<const std::vector<std::int32_t>> word_ids) const {
  if (word_ids.empty())
    throw EmptyText("no descriptions to encode");
  std::int64_t m = 0;
  for (const auto &ids: word_ids) {
    if (ids.empty())
      throw EmptyText("description contains no words");
    m = std::max<std::int64_t>(m, static_cast<std::int64_t>(ids.size()));
  }
  m = std::min<std::int64_t>(m, config_.max_text_len);
  const auto b = static_cast<std::int64_t>(word_ids.size());

  std::vector<std::int32_t> flat(b * m, 0);
  std::vector<std::int32_t> positions(b * m, 0);
  TextBatch<S> out;
  out.mask.assign(b * m, 0);
  for (std::int64_t i = 0; i < b; ++i) {
    const auto len = std::min<std::int64_t>(
        m, static_cast<std::int64_t>(word_ids[i].size()));
    for (std::int64_t j = 0; j < m; ++j) {
      positions[i * m + j] = static_cast<std::int32_t>(j);
      if (j < len) {
        flat[i * m + j] = word_ids[i][j];
        out.mask[i * m + j] = 1;
      }
    }
  }
  Tensor<S> words = embedding(parameter("text.word_emb"), flat, { b, m });
  Tensor<S> pos = embedding(parameter("text.pos_emb"), positions, { b, m });
  out.embeddings = add(words, pos);
  return out;
}

template <class S>
Tensor<S> Denoiser<S>::predict(const Tensor<S> &xt,
                               std::span<const int> timesteps,
                               const TextBatch<S> *text) const {
  const auto &c = config_;
  if (xt.rank() != 3 || xt.dim(1) != c.n || xt.dim(2) != c.d)
    throw ShapeMismatch("denoiser input must be (B, " + std::to_string(c.n)
                        + ", " + std::to_string(c.d) + "), got "
                        + shape_str(xt.shape()));
  const std::int64_t b = xt.dim(0);
  if (static_cast<std::int64_t>(timesteps.size()) != b)
    throw ShapeMismatch("expected " + std::to_string(b) + " timesteps, got "
                        + std::to_string(timesteps.size()));
  if (text && text->batch() != b)
    throw ShapeMismatch("text batch " + std::to_string(text->batch())
                        + " differs from state batch " + std::to_string(b));

  Tensor<S> h = add(matmul(xt, parameter("in.w")), parameter("in.b"));
  h = add(h, parameter("pos_emb"));
  h = add(h, repeat_rows(step_embedding(timesteps), c.n));

  Tensor<S> text_hidden;
  if (text)
    text_hidden = text_projection(text->embeddings);

  for (int l = 0; l < c.layers; ++l) {
    const std::string p = "layers." + std::to_string(l) + ".";
    h = add(h, self_attention(l, norm(h, p + "ln1")));
    if (text)
      h = add(h, cross_attention(l, norm(h, p + "ln2"), text_hidden,
                                 text->mask));
    h = add(h, feed_forward(l, norm(h, p + "ln3")));
  }
  h = norm(h, "ln_f");
  return add(matmul(h, parameter("head.w")), parameter("head.b"));
}

template class Denoiser<float>;
template class Denoiser<double>;
template std::vector<float> sinusoidal_encoding(std::span<const int>, int);
template std::vector<double> sinusoidal_encoding(std::span<const int>, int);

}  // namespace smidiff
