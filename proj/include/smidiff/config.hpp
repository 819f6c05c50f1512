//
// SPDX-License-Identifier: Apache-2.0
//

#ifndef SMIDIFF_CONFIG_HPP_
#define SMIDIFF_CONFIG_HPP_

#include <nlohmann/json.hpp>
#include <string>

#include "smidiff/denoiser.hpp"
#include "smidiff/generator.hpp"
#include "smidiff/trainer.hpp"

namespace smidiff {

using Json = nlohmann::ordered_json;

// Every tunable of a run. Sizes that come from data (vocabulary sizes) are
// filled in at training time.
struct RunConfig {
  ModelConfig model = ModelConfig::desk();
  TrainConfig train;
  SamplerConfig sampler;
};

Json to_json(const ModelConfig &c);
Json to_json(const TrainConfig &c);
Json to_json(const SamplerConfig &c);
Json to_json(const RunConfig &c);

// Keys present in `j` override the fields of `c`; unknown keys and wrong
// types throw InvalidArgument.
void apply_json(const Json &j, ModelConfig &c);
void apply_json(const Json &j, TrainConfig &c);
void apply_json(const Json &j, SamplerConfig &c);
void apply_json(const Json &j, RunConfig &c);

// Throws FileError / InvalidArgument.
RunConfig load_run_config(const std::string &path);
void save_run_config(const RunConfig &c, const std::string &path);

}  // namespace smidiff

#endif  // SMIDIFF_CONFIG_HPP_
