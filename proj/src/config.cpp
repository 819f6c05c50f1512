//
// SPDX-License-Identifier: Apache-2.0
//

#include "smidiff/config.hpp"

#include <fstream>
#include <functional>
#include <map>

#include "smidiff/errors.hpp"

namespace smidiff {

namespace {

// Field table shared by to_json and apply_json.
template <class C>
using Field = std::pair<std::function<Json(const C &)>,
                        std::function<void(const Json &, C &)>>;

template <class C>
using FieldMap = std::vector<std::pair<std::string, Field<C>>>;

template <class C, class T>
std::pair<std::string, Field<C>> field(const char *name, T C::*member) {
  return { name,
           { [member](const C &c) { return Json(c.*member); },
             [member, name](const Json &j, C &c) {
               try {
                 c.*member = j.get<T>();
               } catch (const nlohmann::json::exception &) {
                 throw InvalidArgument(std::string("config key '") + name
                                       + "' has the wrong type");
               }
             } } };
}

const FieldMap<ModelConfig> &model_fields() {
  static const FieldMap<ModelConfig> fields = {
    field("vocab_size", &ModelConfig::vocab_size),
    field("text_vocab_size", &ModelConfig::text_vocab_size),
    field("d", &ModelConfig::d),
    field("n", &ModelConfig::n),
    field("d1", &ModelConfig::d1),
    field("d2", &ModelConfig::d2),
    field("layers", &ModelConfig::layers),
    field("heads", &ModelConfig::heads),
    field("ffn_mult", &ModelConfig::ffn_mult),
    field("max_text_len", &ModelConfig::max_text_len),
    field("max_timestep", &ModelConfig::max_timestep),
    field("freeze_text_encoder", &ModelConfig::freeze_text_encoder),
  };
  return fields;
}

const FieldMap<TrainConfig> &train_fields() {
  static const FieldMap<TrainConfig> fields = [] {
    FieldMap<TrainConfig> f = {
      field("T", &TrainConfig::total_steps),
      field("tau", &TrainConfig::tau),
      field("sigma0", &TrainConfig::sigma0),
      field("batch_size", &TrainConfig::batch_size),
      field("max_steps", &TrainConfig::max_steps),
      field("seed", &TrainConfig::seed),
      field("joint", &TrainConfig::joint),
      field("log_every", &TrainConfig::log_every),
      field("checkpoint_every", &TrainConfig::checkpoint_every),
    };
    f.push_back(
        { "schedule",
          { [](const TrainConfig &c) { return Json(to_string(c.schedule)); },
            [](const Json &j, TrainConfig &c) {
              if (!j.is_string())
                throw InvalidArgument("config key 'schedule' must be a string");
              c.schedule = schedule_kind_from_string(j.get<std::string>());
            } } });
    f.push_back(
        { "phase",
          { [](const TrainConfig &c) { return Json(to_string(c.phase)); },
            [](const Json &j, TrainConfig &c) {
              if (!j.is_string())
                throw InvalidArgument("config key 'phase' must be a string");
              c.phase = train_phase_from_string(j.get<std::string>());
            } } });
    auto num = [](const char *name, auto getter) {
      return std::pair<std::string, Field<TrainConfig>>{
        name,
        { [getter](const TrainConfig &c) { return Json(*getter(const_cast<TrainConfig &>(c))); },
          [getter, name](const Json &j, TrainConfig &c) {
            using T = std::remove_reference_t<decltype(*getter(c))>;
            try {
              *getter(c) = j.get<T>();
            } catch (const nlohmann::json::exception &) {
              throw InvalidArgument(std::string("config key '") + name
                                    + "' has the wrong type");
            }
          } }
      };
    };
    f.push_back(num("lr", [](TrainConfig &c) { return &c.adam.lr; }));
    f.push_back(num("beta1", [](TrainConfig &c) { return &c.adam.beta1; }));
    f.push_back(num("beta2", [](TrainConfig &c) { return &c.adam.beta2; }));
    f.push_back(num("adam_eps", [](TrainConfig &c) { return &c.adam.eps; }));
    f.push_back(num("warmup_steps",
                    [](TrainConfig &c) { return &c.adam.warmup_steps; }));
    f.push_back(num("corrupt_p", [](TrainConfig &c) {
      return &c.corruption.apply_probability;
    }));
    f.push_back(num("corrupt_max_edits",
                    [](TrainConfig &c) { return &c.corruption.max_edits; }));
    return f;
  }();
  return fields;
}

const FieldMap<SamplerConfig> &sampler_fields() {
  static const FieldMap<SamplerConfig> fields = {
    field("steps1", &SamplerConfig::steps1),
    field("steps2", &SamplerConfig::steps2),
    field("renoise", &SamplerConfig::renoise),
    field("max_rounds", &SamplerConfig::max_rounds),
    field("clamp", &SamplerConfig::clamp),
    field("seed", &SamplerConfig::seed),
  };
  return fields;
}

template <class C>
Json dump(const FieldMap<C> &fields, const C &c) {
  Json j = Json::object();
  for (const auto &[name, f]: fields)
    j[name] = f.first(c);
  return j;
}

template <class C>
void apply(const FieldMap<C> &fields, const Json &j, C &c,
           const char *section) {
  if (!j.is_object())
    throw InvalidArgument(std::string("config section '") + section
                          + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    auto match = std::find_if(fields.begin(), fields.end(), [&](const auto &f) {
      return f.first == it.key();
    });
    if (match == fields.end())
      throw InvalidArgument("unknown config key '" + std::string(section) + "."
                            + it.key() + "'");
    match->second.second(it.value(), c);
  }
}

}  // namespace

Json to_json(const ModelConfig &c) { return dump(model_fields(), c); }
Json to_json(const TrainConfig &c) { return dump(train_fields(), c); }
Json to_json(const SamplerConfig &c) { return dump(sampler_fields(), c); }

Json to_json(const RunConfig &c) {
  Json j = Json::object();
  j["model"] = to_json(c.model);
  j["train"] = to_json(c.train);
  j["sampler"] = to_json(c.sampler);
  return j;
}

void apply_json(const Json &j, ModelConfig &c) {
  apply(model_fields(), j, c, "model");
}
void apply_json(const Json &j, TrainConfig &c) {
  apply(train_fields(), j, c, "train");
}
void apply_json(const Json &j, SamplerConfig &c) {
  apply(sampler_fields(), j, c, "sampler");
}

void apply_json(const Json &j, RunConfig &c) {
  if (!j.is_object())
    throw InvalidArgument("config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "model")
      apply_json(it.value(), c.model);
    else if (it.key() == "train")
      apply_json(it.value(), c.train);
    else if (it.key() == "sampler")
      apply_json(it.value(), c.sampler);
    else
      throw InvalidArgument("unknown config section '" + it.key() + "'");
  }
}

RunConfig load_run_config(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw FileError("cannot open config '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception &e) {
    throw InvalidArgument("config '" + path + "' is not valid JSON: "
                          + e.what());
  }
  RunConfig c;
  apply_json(j, c);
  return c;
}

void save_run_config(const RunConfig &c, const std::string &path) {
  std::ofstream out(path);
  if (!out)
    throw FileError("cannot write config '" + path + "'");
  out << to_json(c).dump(2) << '\n';
}

}  // namespace smidiff
