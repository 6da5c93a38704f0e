#include "duet/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "duet/util.hpp"

namespace duet {

namespace {

using nlohmann::json;

class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw std::invalid_argument(path_ + ": expected an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw std::invalid_argument("expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw std::invalid_argument("expected an integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw std::invalid_argument("expected a number");
      } else {
        if (!it->is_string()) throw std::invalid_argument("expected a string");
      }
      out = it->get<T>();
    } catch (const std::exception& e) {
      throw std::invalid_argument(path_ + "." + key + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (seen_.count(it.key()) == 0) {
        throw std::invalid_argument("unknown config key: " + path_ + "." + it.key());
      }
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json model_json(const ModelConfig& m) {
  return json{{"joints", m.joints},
              {"frames", m.frames},
              {"latent", m.latent},
              {"text_width", m.text_width},
              {"text_ffn", m.text_ffn},
              {"text_layers", m.text_layers},
              {"self_layers", m.self_layers},
              {"graph_layers", m.graph_layers},
              {"refine_layers", m.refine_layers},
              {"segments", m.segments},
              {"predictor_hidden", m.predictor_hidden},
              {"lambda_s2", m.lambda_s2},
              {"lambda_s3", m.lambda_s3},
              {"share_person_weights", m.share_person_weights},
              {"adjacency", std::string(to_string(m.adjacency))},
              {"use_text", m.use_text}};
}

json schedule_json(const DiffusionConfig& d) {
  return json{{"steps", d.steps}, {"beta_start", d.beta_start}, {"beta_end", d.beta_end}};
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  if (diffusion.steps < 1) throw std::invalid_argument("diffusion.steps must be >= 1");
  if (!(diffusion.beta_start > 0.0) || !(diffusion.beta_start <= diffusion.beta_end) ||
      !(diffusion.beta_end < 1.0)) {
    throw std::invalid_argument("diffusion betas must satisfy 0 < beta_start <= beta_end < 1");
  }
  if (diffusion.sample_steps < 0) throw std::invalid_argument("diffusion.sample_steps must be >= 0");
  if (!(diffusion.guidance_scale >= 0.0)) {
    throw std::invalid_argument("diffusion.guidance_scale must be >= 0");
  }
  if (!(loss.lambda_distance >= 0.0)) throw std::invalid_argument("loss.lambda_distance must be >= 0");
  if (!(loss.condition_dropout >= 0.0 && loss.condition_dropout <= 1.0)) {
    throw std::invalid_argument("loss.condition_dropout must lie in [0, 1]");
  }
  if (!(optim.learning_rate > 0.0) || !(optim.final_learning_rate >= 0.0)) {
    throw std::invalid_argument("optim learning rates must be positive");
  }
  if (optim.steps < 0) throw std::invalid_argument("optim.steps must be >= 0");
  if (optim.batch_size < 1) throw std::invalid_argument("optim.batch_size must be >= 1");
  if (!(optim.grad_clip >= 0.0)) throw std::invalid_argument("optim.grad_clip must be >= 0");
  if (optim.checkpoint_every < 0) throw std::invalid_argument("optim.checkpoint_every must be >= 0");
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  Section root(j, "config");
  if (const json* m = root.child("model")) {
    Section s(*m, "model");
    auto& x = c.model;
    s.read("joints", x.joints);
    s.read("frames", x.frames);
    s.read("latent", x.latent);
    s.read("text_width", x.text_width);
    s.read("text_ffn", x.text_ffn);
    s.read("text_layers", x.text_layers);
    s.read("self_layers", x.self_layers);
    s.read("graph_layers", x.graph_layers);
    s.read("refine_layers", x.refine_layers);
    s.read("segments", x.segments);
    s.read("predictor_hidden", x.predictor_hidden);
    s.read("lambda_s2", x.lambda_s2);
    s.read("lambda_s3", x.lambda_s3);
    s.read("share_person_weights", x.share_person_weights);
    std::string mode(to_string(x.adjacency));
    s.read("adjacency", mode);
    x.adjacency = parse_adjacency_mode(mode);
    s.read("use_text", x.use_text);
    s.finish();
  }
  if (const json* d = root.child("diffusion")) {
    Section s(*d, "diffusion");
    s.read("steps", c.diffusion.steps);
    s.read("beta_start", c.diffusion.beta_start);
    s.read("beta_end", c.diffusion.beta_end);
    s.read("sample_steps", c.diffusion.sample_steps);
    s.read("guidance_scale", c.diffusion.guidance_scale);
    s.finish();
  }
  if (const json* l = root.child("loss")) {
    Section s(*l, "loss");
    s.read("lambda_distance", c.loss.lambda_distance);
    s.read("condition_dropout", c.loss.condition_dropout);
    s.finish();
  }
  if (const json* o = root.child("optim")) {
    Section s(*o, "optim");
    s.read("learning_rate", c.optim.learning_rate);
    s.read("final_learning_rate", c.optim.final_learning_rate);
    s.read("steps", c.optim.steps);
    s.read("batch_size", c.optim.batch_size);
    s.read("grad_clip", c.optim.grad_clip);
    s.read("checkpoint_every", c.optim.checkpoint_every);
    s.finish();
  }
  if (const json* p = root.child("paths")) {
    Section s(*p, "paths");
    s.read("prompt_cache", c.paths.prompt_cache);
    s.finish();
  }
  root.read("seed", c.seed);
  root.finish();
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config " + path + ": " + e.what());
  }
  return config_from_json(j);
}

json config_to_json(const RunConfig& c) {
  return json{{"model", model_json(c.model)},
              {"diffusion",
               {{"steps", c.diffusion.steps},
                {"beta_start", c.diffusion.beta_start},
                {"beta_end", c.diffusion.beta_end},
                {"sample_steps", c.diffusion.sample_steps},
                {"guidance_scale", c.diffusion.guidance_scale}}},
              {"loss",
               {{"lambda_distance", c.loss.lambda_distance},
                {"condition_dropout", c.loss.condition_dropout}}},
              {"optim",
               {{"learning_rate", c.optim.learning_rate},
                {"final_learning_rate", c.optim.final_learning_rate},
                {"steps", c.optim.steps},
                {"batch_size", c.optim.batch_size},
                {"grad_clip", c.optim.grad_clip},
                {"checkpoint_every", c.optim.checkpoint_every}}},
              {"seed", c.seed},
              {"paths", {{"prompt_cache", c.paths.prompt_cache}}}};
}

std::uint64_t config_fingerprint(const RunConfig& config) {
  const json key{{"model", model_json(config.model)},
                 {"schedule", schedule_json(config.diffusion)}};
  return fnv1a64(key.dump());
}

}  // namespace duet
