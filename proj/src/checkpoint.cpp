//
// SPDX-License-Identifier: Apache-2.0
//

#include "smidiff/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "smidiff/errors.hpp"

namespace smidiff {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

class Writer {
 public:
  template <class T>
  void put(T v) {
    const auto *p = reinterpret_cast<const std::uint8_t *>(&v);
    out_.insert(out_.end(), p, p + sizeof(T));
  }
  void bytes(const void *data, std::size_t size) {
    const auto *p = static_cast<const std::uint8_t *>(data);
    out_.insert(out_.end(), p, p + size);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t> &in): in_(in) { }

  template <class T>
  T get(const char *what) {
    T v;
    need(sizeof(T), what);
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void bytes(void *dst, std::size_t size, const char *what) {
    need(size, what);
    std::memcpy(dst, in_.data() + pos_, size);
    pos_ += size;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t size, const char *what) {
    if (size > in_.size() - pos_)
      throw FormatError(std::string("checkpoint truncated while reading ")
                        + what);
  }
  const std::vector<std::uint8_t> &in_;
  std::size_t pos_ = 0;
};

struct RawTensor {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

Json metadata_of(const ModelBundle &b) {
  Json j = Json::object();
  j["model"] = to_json(b.config);
  j["train"] = to_json(b.train);
  j["schedule"] = std::string(to_string(b.train.schedule));
  j["step"] = b.step;
  j["phase"] = b.phase;
  j["vocab"] = b.vocab.tokens();
  j["text_vocab"] = b.text_vocab.words();
  return j;
}

std::pair<Json, std::vector<RawTensor>> parse(
    const std::vector<std::uint8_t> &bytes) {
  Reader r(bytes);
  char magic[4];
  r.bytes(magic, 4, "magic");
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw FormatError("not a checkpoint: bad magic");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version "
                      + std::to_string(version));
  const auto meta_len = r.get<std::uint64_t>("metadata length");
  if (meta_len > bytes.size())
    throw FormatError("checkpoint truncated while reading metadata");
  std::string meta(meta_len, '\0');
  r.bytes(meta.data(), meta_len, "metadata");
  Json j;
  try {
    j = Json::parse(meta);
  } catch (const nlohmann::json::exception &e) {
    throw FormatError(std::string("checkpoint metadata is not JSON: ")
                      + e.what());
  }

  const auto count = r.get<std::uint64_t>("tensor count");
  std::vector<RawTensor> tensors;
  for (std::uint64_t i = 0; i < count; ++i) {
    RawTensor t;
    const auto name_len = r.get<std::uint32_t>("tensor name length");
    if (name_len > bytes.size())
      throw FormatError("checkpoint truncated while reading tensor name");
    t.name.resize(name_len);
    r.bytes(t.name.data(), name_len, "tensor name");
    const auto dtype = r.get<std::uint8_t>("dtype");
    if (dtype != 0)
      throw FormatError("tensor '" + t.name + "' has unknown dtype "
                        + std::to_string(dtype));
    const auto rank = r.get<std::uint32_t>("rank");
    std::uint64_t numel = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      const auto dim = r.get<std::uint64_t>("dims");
      if (dim > bytes.size())
        throw FormatError("tensor '" + t.name + "' has an implausible shape");
      t.shape.push_back(static_cast<std::int64_t>(dim));
      numel *= dim;
    }
    if (numel > bytes.size())
      throw FormatError("checkpoint truncated while reading tensor '"
                        + t.name + "'");
    t.data.resize(numel);
    r.bytes(t.data.data(), numel * sizeof(float), "tensor data");
    tensors.push_back(std::move(t));
  }
  if (!r.done())
    throw FormatError("trailing bytes after the tensor table");
  return { std::move(j), std::move(tensors) };
}

// All-or-nothing copy into `model`.
void assign(const std::vector<RawTensor> &tensors, Denoiser<float> &model) {
  auto &params = model.parameters();
  if (tensors.size() != params.size())
    throw FormatError("checkpoint holds " + std::to_string(tensors.size())
                      + " tensors, model expects "
                      + std::to_string(params.size()));
  std::vector<const RawTensor *> order;
  for (const auto &p: params) {
    const RawTensor *found = nullptr;
    for (const auto &t: tensors)
      if (t.name == p.name)
        found = &t;
    if (!found)
      throw FormatError("checkpoint lacks tensor '" + p.name + "'");
    if (found->shape != p.tensor.shape())
      throw ShapeMismatch("tensor '" + p.name + "' has shape "
                          + shape_str(found->shape) + ", model expects "
                          + shape_str(p.tensor.shape()));
    order.push_back(found);
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto dst = params[i].tensor.mutable_data();
    std::copy(order[i]->data.begin(), order[i]->data.end(), dst.begin());
  }
}

std::vector<std::uint8_t> read_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw FileError("cannot open checkpoint '" + path + "'");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const ModelBundle &bundle) {
  if (!bundle.model)
    throw ModelNotLoaded("bundle has no network to save");
  Writer w;
  w.bytes(kCheckpointMagic, 4);
  w.put<std::uint32_t>(kCheckpointVersion);
  const std::string meta = metadata_of(bundle).dump();
  w.put<std::uint64_t>(meta.size());
  w.bytes(meta.data(), meta.size());
  const auto &params = bundle.model->parameters();
  w.put<std::uint64_t>(params.size());
  for (const auto &p: params) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p.name.size()));
    w.bytes(p.name.data(), p.name.size());
    w.put<std::uint8_t>(0);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p.tensor.rank()));
    for (auto dim: p.tensor.shape())
      w.put<std::uint64_t>(static_cast<std::uint64_t>(dim));
    auto data = p.tensor.data();
    w.bytes(data.data(), data.size() * sizeof(float));
  }
  return w.take();
}

ModelBundle deserialize_checkpoint(const std::vector<std::uint8_t> &bytes) {
  auto [meta, tensors] = parse(bytes);
  ModelBundle b;
  try {
    apply_json(meta.at("model"), b.config);
    apply_json(meta.at("train"), b.train);
    b.step = meta.at("step").get<std::int64_t>();
    b.phase = meta.at("phase").get<std::string>();
    b.vocab = Vocabulary(meta.at("vocab").get<std::vector<std::string>>());
    b.text_vocab =
        TextVocabulary(meta.at("text_vocab").get<std::vector<std::string>>());
  } catch (const nlohmann::json::exception &e) {
    throw FormatError(std::string("checkpoint metadata incomplete: ")
                      + e.what());
  } catch (const InvalidArgument &e) {
    throw FormatError(std::string("checkpoint metadata invalid: ") + e.what());
  }
  if (b.config.vocab_size != b.vocab.size()
      || b.config.text_vocab_size != b.text_vocab.size())
    throw FormatError("checkpoint vocabulary sizes disagree with its config");
  b.model = std::make_shared<Denoiser<float>>(b.config, 0);
  assign(tensors, *b.model);
  return b;
}

void save_checkpoint(const ModelBundle &bundle, const std::string &path) {
  const auto bytes = serialize_checkpoint(bundle);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw FileError("cannot write checkpoint '" + path + "'");
  out.write(reinterpret_cast<const char *>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out)
    throw FileError("failed writing checkpoint '" + path + "'");
}

ModelBundle load_checkpoint(const std::string &path) {
  return deserialize_checkpoint(read_file(path));
}

Json load_parameters(const std::string &path, Denoiser<float> &model) {
  auto [meta, tensors] = parse(read_file(path));
  assign(tensors, model);
  return meta;
}

}  // namespace smidiff
