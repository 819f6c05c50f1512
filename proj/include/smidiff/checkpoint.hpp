//
// SPDX-License-Identifier: Apache-2.0
//

#ifndef SMIDIFF_CHECKPOINT_HPP_
#define SMIDIFF_CHECKPOINT_HPP_

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "smidiff/config.hpp"
#include "smidiff/denoiser.hpp"
#include "smidiff/smiles_tok.hpp"
#include "smidiff/text.hpp"

namespace smidiff {

inline constexpr char kCheckpointMagic[4] = { 'T', 'G', 'M', 'D' };
inline constexpr std::uint32_t kCheckpointVersion = 1;

// A trained network together with everything needed to sample from it.
struct ModelBundle {
  ModelConfig config;
  TrainConfig train;
  Vocabulary vocab;
  TextVocabulary text_vocab;
  std::int64_t step = 0;
  std::string phase = "one";  // "one", "two" or "joint"
  std::shared_ptr<Denoiser<float>> model;
};

// Layout: magic, u32 version, u64 + JSON metadata, u64 tensor count, then
// per tensor u32 + name, u8 dtype (0 = f32), u32 rank, u64 dims, f32 data.
// All integers little-endian.
std::vector<std::uint8_t> serialize_checkpoint(const ModelBundle &bundle);
ModelBundle deserialize_checkpoint(const std::vector<std::uint8_t> &bytes);

// Throws FileError.
void save_checkpoint(const ModelBundle &bundle, const std::string &path);
// Throws FileError / FormatError / ShapeMismatch.
ModelBundle load_checkpoint(const std::string &path);

// Loads tensors into an existing network after checking every name and
// shape; nothing is modified unless all checks pass. Returns the metadata.
Json load_parameters(const std::string &path, Denoiser<float> &model);

}  // namespace smidiff

#endif  // SMIDIFF_CHECKPOINT_HPP_
