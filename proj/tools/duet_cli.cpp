#include <CLI11.hpp>

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "duet/checkpoint.hpp"
#include "duet/config.hpp"
#include "duet/dataset.hpp"
#include "duet/error.hpp"
#include "duet/evaluator.hpp"
#include "duet/pipeline.hpp"
#include "duet/synth.hpp"
#include "duet/text.hpp"
#include "duet/trainer.hpp"
#include "duet/util.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumeric = 3;

std::uint64_t default_seed() {
  if (const char* env = std::getenv("DUET_SEED")) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(env, &used, 0);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw std::invalid_argument(std::string("DUET_SEED is not an unsigned integer: ") + env);
  }
  return 0;
}

std::optional<duet::PromptCache> maybe_cache(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return duet::PromptCache::load(path);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::invalid_argument("cannot write " + path);
  out << text;
}

std::vector<duet::Scenario> scenarios_from(const std::string& spec) {
  std::vector<duet::Scenario> out;
  if (spec == "all") {
    return {duet::Scenario::approach, duet::Scenario::mirror, duet::Scenario::orbit,
            duet::Scenario::push_retreat};
  }
  std::stringstream ss(spec);
  std::string name;
  while (std::getline(ss, name, ',')) {
    if (!name.empty()) out.push_back(duet::parse_scenario(name));
  }
  if (out.empty()) throw std::invalid_argument("no scenario given");
  return out;
}

struct SeedOption {
  std::uint64_t value = 0;
  bool given = false;
  std::uint64_t resolve() const { return given ? value : default_seed(); }
};

void add_seed(CLI::App* app, SeedOption& seed) {
  app->add_option("--seed", seed.value, "Random seed (default: $DUET_SEED or 0)")
      ->each([&seed](const std::string&) { seed.given = true; });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-person text-to-motion diffusion toolkit"};
  app.require_subcommand(1);

  // synth-data
  auto* synth = app.add_subcommand("synth-data", "Generate a synthetic dual-motion dataset");
  std::string synth_scenario = "all";
  int synth_count = 0;
  std::string synth_out;
  duet::SynthOptions synth_opts;
  std::string synth_cache;
  SeedOption synth_seed;
  synth->add_option("--scenario", synth_scenario,
                    "approach, mirror, orbit, push-retreat, a comma list, or all")
      ->capture_default_str();
  synth->add_option("--count", synth_count, "Number of samples")->required()->check(CLI::NonNegativeNumber);
  synth->add_option("--out", synth_out, "Output dataset path")->required();
  synth->add_option("--frames", synth_opts.frames, "Frames per sample")->capture_default_str();
  synth->add_option("--joints", synth_opts.joints, "Joints per person")->capture_default_str();
  synth->add_option("--cache", synth_cache, "Prompt decomposition cache (TSV)");
  add_seed(synth, synth_seed);

  // train
  auto* train = app.add_subcommand("train", "Train the denoiser");
  std::string train_config;
  std::string train_data;
  std::string train_out;
  std::optional<int> train_steps;
  int train_log_every = 100;
  SeedOption train_seed;
  train->add_option("--config", train_config, "Run configuration (JSON)");
  train->add_option("--data", train_data, "Training dataset")->required();
  train->add_option("--out", train_out, "Checkpoint path")->required();
  train->add_option("--steps", train_steps, "Override optim.steps");
  train->add_option("--log-every", train_log_every, "Log interval in steps (0 = quiet)")
      ->capture_default_str();
  add_seed(train, train_seed);

  // generate
  auto* gen = app.add_subcommand("generate", "Sample motions for a prompt");
  std::string gen_ckpt;
  std::string gen_prompt;
  int gen_count = 1;
  std::string gen_out;
  std::string gen_cache;
  std::string gen_config;
  bool gen_force = false;
  duet::SamplingOverrides gen_overrides;
  SeedOption gen_seed;
  gen->add_option("--ckpt", gen_ckpt, "Checkpoint")->required();
  gen->add_option("--prompt", gen_prompt, "Overall interaction prompt")->required();
  gen->add_option("--count", gen_count, "Number of samples")->capture_default_str();
  gen->add_option("--out", gen_out, "Output dataset path")->required();
  gen->add_option("--cache", gen_cache, "Prompt decomposition cache (TSV)");
  gen->add_option("--config", gen_config, "Expected configuration; its fingerprint must match");
  gen->add_flag("--force", gen_force, "Load despite a fingerprint mismatch");
  gen->add_option("--sample-steps", gen_overrides.sample_steps, "Override the sampler step count");
  gen->add_option("--guidance", gen_overrides.guidance_scale, "Override the guidance scale");
  add_seed(gen, gen_seed);

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Compute metrics against a dataset");
  std::string eval_ckpt;
  std::string eval_pred;
  std::string eval_data;
  std::string eval_metrics = "mpjpe,mpjie";
  std::string eval_evaluator;
  std::string eval_report;
  std::string eval_config;
  bool eval_force = false;
  duet::EvaluateOptions eval_opts;
  SeedOption eval_seed;
  auto* ckpt_opt = eval->add_option("--ckpt", eval_ckpt, "Checkpoint to sample from");
  auto* pred_opt = eval->add_option("--pred", eval_pred, "Dataset of precomputed predictions");
  ckpt_opt->excludes(pred_opt);
  eval->add_option("--data", eval_data, "Ground-truth dataset")->required();
  eval->add_option("--metrics", eval_metrics, "Comma list of metrics or 'all'")->capture_default_str();
  eval->add_option("--evaluator", eval_evaluator, "Trained toy evaluator (embedding metrics)");
  eval->add_option("--report", eval_report, "Write <path>.tsv and <path>.json");
  eval->add_option("--config", eval_config, "Expected configuration; its fingerprint must match");
  eval->add_flag("--force", eval_force, "Load despite a fingerprint mismatch");
  eval->add_option("--sample-steps", eval_opts.overrides.sample_steps, "Override the sampler step count");
  eval->add_option("--guidance", eval_opts.overrides.guidance_scale, "Override the guidance scale");
  eval->add_option("--pool", eval_opts.retrieval_pool, "Retrieval pool size")->capture_default_str();
  add_seed(eval, eval_seed);

  // train-evaluator
  auto* tev = app.add_subcommand("train-evaluator", "Train the toy contrastive evaluator");
  std::string tev_data;
  std::string tev_out;
  duet::EvaluatorConfig tev_cfg;
  SeedOption tev_seed;
  tev->add_option("--data", tev_data, "Training dataset")->required();
  tev->add_option("--out", tev_out, "Evaluator output path")->required();
  tev->add_option("--steps", tev_cfg.steps, "Optimizer steps")->capture_default_str();
  tev->add_option("--embed-width", tev_cfg.embed_width, "Embedding width")->capture_default_str();
  add_seed(tev, tev_seed);

  // decompose
  auto* dec = app.add_subcommand("decompose", "Split an overall prompt into per-person prompts");
  std::string dec_prompt;
  std::string dec_cache;
  dec->add_option("--prompt", dec_prompt, "Overall prompt")->required();
  dec->add_option("--cache", dec_cache, "Prompt decomposition cache (TSV)");

  // inspect-distance
  auto* insp = app.add_subcommand("inspect-distance", "Tabulate per-segment interaction distances");
  std::string insp_data;
  int insp_k = 3;
  std::string insp_ckpt;
  std::string insp_out;
  insp->add_option("--data", insp_data, "Dataset")->required();
  insp->add_option("--k", insp_k, "Segment count")->capture_default_str();
  insp->add_option("--ckpt", insp_ckpt, "Also print the checkpoint's predicted profiles");
  insp->add_option("--out", insp_out, "Write the table here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*synth) {
      const auto cache = maybe_cache(synth_cache);
      const auto samples = duet::synth_dataset(scenarios_from(synth_scenario), synth_count,
                                               synth_opts, synth_seed.resolve(),
                                               cache ? &*cache : nullptr);
      duet::save_dataset(synth_out, samples);
      std::cout << "wrote " << samples.size() << " samples to " << synth_out << "\n";
    } else if (*train) {
      duet::RunConfig cfg = train_config.empty() ? duet::RunConfig{} : duet::load_config(train_config);
      if (train_steps) cfg.optim.steps = *train_steps;
      if (train_seed.given || train_config.empty()) cfg.seed = train_seed.resolve();
      cfg.validate();
      const auto data = duet::load_dataset(train_data);
      duet::TrainerOptions opts;
      opts.checkpoint_path = train_out;
      opts.dump_path = train_out + ".nan.json";
      if (train_log_every > 0) {
        opts.on_step = [&](const duet::StepStats& s) {
          if (s.step % train_log_every == 0 || s.step == cfg.optim.steps) {
            std::cerr << "step " << s.step << " loss " << s.loss << " recon " << s.recon
                      << " distance " << s.distance << " lr " << s.rate << "\n";
          }
        };
      }
      duet::Trainer trainer(cfg, data, opts);
      trainer.run();
      std::cout << "wrote checkpoint " << train_out << " (fingerprint "
                << duet::hex64(duet::config_fingerprint(cfg)) << ")\n";
    } else if (*gen) {
      std::optional<duet::RunConfig> expected;
      if (!gen_config.empty()) expected = duet::load_config(gen_config);
      const auto ck = duet::load_checkpoint(gen_ckpt, expected ? &*expected : nullptr, gen_force);
      const auto cache = maybe_cache(gen_cache.empty() ? ck.config.paths.prompt_cache : gen_cache);
      const auto g = duet::generate(ck, gen_prompt, gen_count, gen_seed.resolve(),
                                    cache ? &*cache : nullptr, gen_overrides);
      duet::write_generation(gen_out, g);
      std::cout << "person1\t" << g.prompts.person1 << "\nperson2\t" << g.prompts.person2 << "\n";
      std::cout << "wrote " << g.samples.size() << " samples to " << gen_out << "\n";
    } else if (*eval) {
      if (eval_ckpt.empty() == eval_pred.empty()) {
        throw std::invalid_argument("evaluate needs exactly one of --ckpt or --pred");
      }
      eval_opts.metrics = duet::parse_metrics(eval_metrics);
      eval_opts.seed = eval_seed.resolve();
      std::optional<duet::ToyEvaluator> evaluator;
      if (!eval_evaluator.empty()) {
        evaluator = duet::ToyEvaluator::load(eval_evaluator);
        eval_opts.evaluator = &*evaluator;
      }
      const auto truth = duet::load_dataset(eval_data);
      duet::Report report;
      if (!eval_ckpt.empty()) {
        std::optional<duet::RunConfig> expected;
        if (!eval_config.empty()) expected = duet::load_config(eval_config);
        const auto ck = duet::load_checkpoint(eval_ckpt, expected ? &*expected : nullptr, eval_force);
        report = duet::evaluate_checkpoint(ck, truth, eval_opts);
      } else {
        const auto pred = duet::load_dataset(eval_pred);
        std::vector<std::vector<duet::DualMotion>> groups;
        std::map<std::string, std::size_t> by_prompt;
        for (const auto& s : pred) {
          auto [it, fresh] = by_prompt.emplace(s.prompts.overall, groups.size());
          if (fresh) groups.emplace_back();
          groups[it->second].push_back(s.motion);
        }
        report = duet::evaluate_predictions(pred, truth, eval_opts, "predictions", groups);
      }
      std::cout << report.to_tsv();
      if (!eval_report.empty()) {
        write_text(eval_report + ".tsv", report.to_tsv());
        write_text(eval_report + ".json", report.to_json().dump(2) + "\n");
      }
    } else if (*tev) {
      const auto data = duet::load_dataset(tev_data);
      const auto ev = duet::ToyEvaluator::train(data, tev_cfg, tev_seed.resolve());
      ev.save(tev_out);
      std::cout << "wrote evaluator " << tev_out << "\n";
    } else if (*dec) {
      const auto cache = maybe_cache(dec_cache);
      const auto rec = duet::decompose_prompt(dec_prompt, cache ? &*cache : nullptr);
      const nlohmann::json j{{"overall", rec.overall},
                             {"person1", rec.person1},
                             {"person2", rec.person2},
                             {"source", std::string(duet::to_string(rec.source))}};
      std::cout << j.dump(2) << "\n";
    } else if (*insp) {
      const auto data = duet::load_dataset(insp_data);
      std::optional<duet::ModelCheckpoint> ck;
      if (!insp_ckpt.empty()) ck = duet::load_checkpoint(insp_ckpt);
      const std::string table = duet::distance_table(data, insp_k, ck ? &*ck : nullptr);
      if (insp_out.empty()) {
        std::cout << table;
      } else {
        write_text(insp_out, table);
      }
    }
  } catch (const duet::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const duet::FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const duet::ContractError& e) {
    std::cerr << "contract error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
