// Property-based acceptance checks. Each criterion prints one line of the
// form "criterion N: PASS|FAIL - detail"; the exit status is nonzero when any
// selected criterion fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "duet/adaptive.hpp"
#include "duet/attention.hpp"
#include "duet/checkpoint.hpp"
#include "duet/config.hpp"
#include "duet/denoiser.hpp"
#include "duet/diffusion.hpp"
#include "duet/metrics.hpp"
#include "duet/optim.hpp"
#include "duet/pipeline.hpp"
#include "duet/trainer.hpp"
#include "duet/util.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace duet;

namespace {

struct Settings {
  std::string cli;
  fs::path workdir;
  // Learning budgets. The defaults are the full acceptance budgets.
  int overfit_steps = 2000;
  int corpus_samples = 500;
  int heldout_samples = 100;
  int corpus_steps = 20000;
  int ablation_steps = 5000;
  int ablation_seeds = 3;
  bool verbose = false;
};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

// Records the worst deviation over many oracle comparisons.
struct Tally {
  double worst = 0.0;
  int count = 0;
  void add(double got, double want) {
    worst = std::max(worst, std::abs(got - want));
    ++count;
  }
};

JointPositions random_positions(int frames, int joints, std::mt19937_64& rng) {
  return JointPositions{random_normal(frames, 3 * joints, 1.0, rng), joints};
}

const std::vector<Scenario> kScenarios{Scenario::approach, Scenario::mirror, Scenario::orbit,
                                       Scenario::push_retreat};

// ---------------------------------------------------------------------------
// 1. Formula oracles

Outcome formula_oracles(const Settings&) {
  constexpr int kTrials = 100;
  constexpr double kTol = 1e-6;
  std::mt19937_64 rng(101);
  std::map<std::string, Tally> tallies;

  for (int trial = 0; trial < kTrials; ++trial) {
    const int frames = 4 + trial % 11, joints = 1 + trial % 5, k = 1 + trial % 4;
    const auto p1 = random_positions(frames, joints, rng);
    const auto p2 = random_positions(frames, joints, rng);

    const RowVector profile = gt_distance_profile(p1, p2, segment_bounds(frames, k));
    const auto want = oracle::distance_profile(p1, p2, k);
    for (int s = 0; s < k; ++s) tallies["gt_distance_profile"].add(profile(s), want[s]);

    tallies["mpjpe"].add(mpjpe(p1, p2), oracle::joint_mean(p1, p2));
    tallies["mpjie"].add(mpjie(p1, p2), oracle::joint_mean(p1, p2));

    const int e = 2 + trial % 5;
    const Matrix a = random_normal(e + 2 + trial % 7, e, 1.0, rng);
    const Matrix b = (random_normal(e + 4, e, 0.6 + 0.01 * trial, rng).array() + 0.3).matrix();
    tallies["fid"].add(fid(a, b), oracle::fid(a, b));

    const Matrix m = random_normal(1 + trial % 9, e, 1.0, rng);
    const Matrix t = random_normal(m.rows(), e, 1.0, rng);
    tallies["mm_dist"].add(mm_dist(m, t), oracle::mm_dist(m, t));

    const int steps = 2 + trial * 7;
    const double beta_end = 0.01 + 0.0001 * trial;
    const DiffusionSchedule schedule = make_schedule(steps, 1e-4, beta_end);
    const int step = trial % steps;
    const MotionPair x0 = gaussian_like(frames, e, rng);
    const MotionPair noise = gaussian_like(frames, e, rng);
    const MotionPair xt = q_sample(x0, step, noise, schedule);
    const double abar = oracle::alpha_bar(steps, 1e-4, beta_end, step);
    const Matrix w1 = oracle::q_sample(x0.person1, noise.person1, abar);
    const Matrix w2 = oracle::q_sample(x0.person2, noise.person2, abar);
    double dq = std::max((xt.person1 - w1).cwiseAbs().maxCoeff(),
                         (xt.person2 - w2).cwiseAbs().maxCoeff());
    tallies["q_sample"].add(dq, 0.0);

    tallies["reconstruction_loss"].add(reconstruction_loss(xt, x0), oracle::mse_pair(xt, x0));
  }

  bool pass = true;
  std::string detail;
  for (const auto& [name, tally] : tallies) {
    pass = pass && tally.worst <= kTol && tally.count >= kTrials;
    detail += name + " " + fmt(tally.worst) + "; ";
  }
  return {pass, "max abs deviation over 100 instances: " + detail};
}

// ---------------------------------------------------------------------------
// 2. Default constants

Outcome default_constants(const Settings&) {
  const RunConfig c;
  std::vector<std::string> bad;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) bad.push_back(what);
  };
  expect(c.model.segments == 3, "K");
  expect(c.model.lambda_s2 == 0.1 && c.model.lambda_s3 == 0.1, "stage mixing weights");
  expect(c.diffusion.guidance_scale == 1.8, "guidance scale");
  expect(c.diffusion.steps == 1000, "diffusion steps");
  expect(c.diffusion.beta_start == 1e-4 && c.diffusion.beta_end == 0.02, "beta range");
  expect(c.model.self_layers == 2 && c.model.graph_layers == 2 && c.model.refine_layers == 3,
         "layer counts");
  expect(c.optim.learning_rate == 2e-4 && c.optim.final_learning_rate == 2e-5, "step sizes");

  const DiffusionSchedule s = make_schedule(c.diffusion.steps, c.diffusion.beta_start,
                                            c.diffusion.beta_end);
  expect(s.betas.size() == 1000 && s.betas(0) == 1e-4 && std::abs(s.betas(999) - 0.02) < 1e-15,
         "schedule endpoints");
  double max_gap = 0.0;
  for (int i = 1; i + 1 < 1000; ++i)
    max_gap = std::max(max_gap, std::abs(s.betas(i + 1) - 2 * s.betas(i) + s.betas(i - 1)));
  expect(max_gap < 1e-15, "schedule linearity");
  const int total = c.optim.steps;
  expect(cosine_rate(0, total, c.optim.learning_rate, c.optim.final_learning_rate) == 2e-4,
         "cosine start");
  expect(std::abs(cosine_rate(total - 1, total, c.optim.learning_rate, c.optim.final_learning_rate) -
                  2e-5) < 1e-18,
         "cosine end");

  // The JSON snapshot must carry the same values through a round trip.
  const RunConfig back = config_from_json(config_to_json(c));
  expect(config_to_json(back) == config_to_json(c), "json round trip");

  std::string detail = "K=3, lambda_s2=lambda_s3=0.1, s=1.8, T=1000, beta 1e-4..0.02 linear, "
                       "layers (2,2,3), rate 2e-4 -> 2e-5";
  if (!bad.empty()) {
    detail = "mismatch:";
    for (const auto& b : bad) detail += " " + b;
  }
  return {bad.empty(), detail};
}

// ---------------------------------------------------------------------------
// 3. Interaction mask

Outcome interaction_mask(const Settings&) {
  std::vector<std::string> bad;
  const SegmentLayout layout = segment_bounds(6, 3);
  RowVector worked(3);
  worked << 0.2, 0.2, 0.8;
  const Matrix w = build_interaction_weights(worked, layout);
  if (w(0, 6 + 2) != 0.2 * 0.2) bad.push_back("0.04 entry");
  if (w(0, 6 + 5) != 0.2 * 0.8) bad.push_back("0.16 entry");
  if (std::abs(w(0, 8) - 0.04) > 1e-15 || std::abs(w(1, 10) - 0.16) > 1e-15)
    bad.push_back("worked values");

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int frames = 3 + trial % 13, k = 1 + trial % 3;
    const SegmentLayout lay = segment_bounds(frames, k);
    RowVector prof(k);
    for (int i = 0; i < k; ++i) prof(i) = unif(rng);
    const Matrix m = build_interaction_weights(prof, lay);
    for (int f = 0; f < frames; ++f)
      for (int g = 0; g < frames; ++g) {
        const double id = f == g ? 1.0 : 0.0;
        // Segments from the half-open bounds rule, independent of segment_of.
        int sf = 0, sg = 0;
        for (int s = 0; s < k; ++s) {
          if (f >= s * frames / k && f < (s + 1) * frames / k) sf = s;
          if (g >= s * frames / k && g < (s + 1) * frames / k) sg = s;
        }
        const double exact = prof(sf) * prof(sg);
        if (m(f, g) != id || m(frames + f, frames + g) != id) bad.push_back("diagonal block");
        if (m(f, frames + g) != exact || m(frames + f, g) != exact) bad.push_back("cross block");
      }
  }
  std::sort(bad.begin(), bad.end());
  bad.erase(std::unique(bad.begin(), bad.end()), bad.end());
  std::string detail = "identity self blocks, cross entries equal coefficient products "
                       "(0.04 = 0.2*0.2, 0.16 = 0.2*0.8) on 50 random layouts";
  if (!bad.empty()) {
    detail = "mismatch:";
    for (const auto& b : bad) detail += " " + b;
  }
  return {bad.empty(), detail};
}

// ---------------------------------------------------------------------------
// 4. Prompt decomposition

Outcome decomposition(const Settings&) {
  std::vector<std::string> bad;
  const auto a = decompose_prompt("these two return to their original position.");
  if (a.person1 != "he returns to his original position") bad.push_back("ex1 person1='" + a.person1 + "'");
  if (a.person2 != "he returns to his original position") bad.push_back("ex1 person2='" + a.person2 + "'");

  const auto b =
      decompose_prompt("one person is crossing the legs, the other person takes a picture.");
  if (b.person1 != "one person is crossing the legs") bad.push_back("ex2 person1='" + b.person1 + "'");
  if (b.person2 != "the other person takes a picture") bad.push_back("ex2 person2='" + b.person2 + "'");

  const auto c =
      decompose_prompt("the first person places both hands on the waist while facing the second.");
  if (c.person1 != "the first person places both hands on the waist while facing the second")
    bad.push_back("ex3 person1='" + c.person1 + "'");
  if (c.person2.find("second") == std::string::npos ||
      c.person2.find("facing the other person") == std::string::npos)
    bad.push_back("ex3 person2='" + c.person2 + "'");

  std::string detail = "ex3 person2 = '" + c.person2 + "'";
  for (const auto& s : bad) detail += "; " + s;
  return {bad.empty(), detail};
}

// ---------------------------------------------------------------------------
// 5. Residual identity chain

Outcome residual_identity(const Settings&) {
  const RunConfig run;
  const ModelConfig& c = run.model;
  Denoiser d(c, 5);
  const int w = c.motion_width();
  if (w != c.latent) return {false, "default latent width differs from the motion width"};

  for (int p = 0; p < 2; ++p) {
    for (int i = 0; i < c.self_layers; ++i) {
      d.self_learning().layer(p, i).value->value.setZero();
      d.self_learning().layer(p, i).text_value->value.setZero();
    }
    d.refinement().highlight(p).mlp_weight->value.setZero();
    d.refinement().highlight(p).mlp_bias->value.setZero();
    for (int i = 0; i < c.refine_layers; ++i) {
      d.refinement().layer(p, i).value->value.setZero();
      d.refinement().layer(p, i).text_value->value.setZero();
      d.refinement().layer(p, i).partner_value->value.setZero();
    }
  }
  // The graph's per-layer feature transforms play the value role in stage 2.
  for (int l = 0; l < c.graph_layers; ++l) d.adaptive().graph_weight(l).value.setZero();

  const HashEmbedder embedder(c.text_width);
  const TextBundle text =
      make_text_bundle(decompose_prompt("two people walk toward each other and shake hands."), embedder);
  std::mt19937_64 rng(6);
  const MotionPair x = gaussian_like(c.frames, w, rng);

  // Stage chain: the latent entering stage 1 must leave stage 3 unchanged.
  ad::Tape tape(false);
  Denoiser::Trace trace;
  d.forward(tape, tape.constant(x.person1), tape.constant(x.person2), 400, text, nullptr, &trace);
  const double chain = std::max((trace.s3_1.value() - trace.input1.value()).cwiseAbs().maxCoeff(),
                                (trace.s3_2.value() - trace.input2.value()).cwiseAbs().maxCoeff());

  // With identity input and output maps the whole denoiser is the identity.
  d.input_weight().value = Matrix::Identity(w, w);
  d.input_bias().value.setZero();
  d.head_weight().value = Matrix::Identity(w, w);
  d.head_bias().value.setZero();
  const MotionPair y = d.predict(x, 400, text);
  const double full = std::max((y.person1 - x.person1).cwiseAbs().maxCoeff(),
                               (y.person2 - x.person2).cwiseAbs().maxCoeff());
  return {chain <= 1e-9 && full <= 1e-9,
          "stage chain max deviation " + fmt(chain) + ", end-to-end max deviation " + fmt(full)};
}

// ---------------------------------------------------------------------------
// 6. Gradient checks

Outcome gradient_checks(const Settings&) {
  using duet::testing::check_gradients;
  using duet::testing::project;
  std::map<std::string, duet::testing::GradCheckResult> results;

  {  // (a) mixed attention over two sources
    std::mt19937_64 rng(21);
    ad::ParameterSet ps;
    auto& x = ps.add("x", random_normal(5, 4, 1, rng));
    auto& t = ps.add("t", random_normal(3, 3, 1, rng));
    auto& wq = ps.add("wq", random_normal(4, 4, 1, rng));
    auto& wk = ps.add("wk", random_normal(4, 4, 1, rng));
    auto& wv = ps.add("wv", random_normal(4, 4, 1, rng));
    auto& tk = ps.add("tk", random_normal(3, 4, 1, rng));
    auto& tv = ps.add("tv", random_normal(3, 4, 1, rng));
    const Matrix proj = random_normal(5, 4, 1, rng);
    results["mixed attention"] = check_gradients(
        ps,
        [&](ad::Tape& tape) {
          const ad::Var xv = tape.param(x);
          const std::array<AttentionSource, 2> src{
              {{xv, tape.param(wk), tape.param(wv)}, {tape.param(t), tape.param(tk), tape.param(tv)}}};
          return project(tape, mixed_attention(xv, tape.param(wq), src), proj);
        },
        1.0, 1, 1);
  }
  {  // (b) distance predictor with its cross-entropy
    std::mt19937_64 rng(22);
    ad::ParameterSet ps;
    DistancePredictor pred(ps, "pred", 6, 8, 3, rng);
    pred.b1().value = random_normal(1, 8, 0.5, rng);
    const Matrix words = random_normal(5, 6, 1.0, rng);
    RowVector gt(3);
    gt << 0.9, 0.3, 0.8;
    results["predictor + cross-entropy"] = check_gradients(
        ps, [&](ad::Tape& t) { return distance_loss(pred.forward(t, t.constant(words)), gt); }, 1.0,
        1, 2);
  }
  {  // (c) graph reasoning under the interaction mask
    std::mt19937_64 rng(23);
    ad::ParameterSet ps;
    auto& h0 = ps.add("h0", random_normal(8, 3, 1, rng));
    auto& adj = ps.add("adj", random_normal(8, 8, 0.5, rng));
    auto& prof = ps.add("profile", (random_normal(1, 2, 0.2, rng).array() + 0.5).matrix());
    auto& w0 = ps.add("w0", random_normal(3, 3, 1, rng));
    auto& w1 = ps.add("w1", random_normal(3, 3, 1, rng));
    const SegmentLayout layout = segment_bounds(4, 2);
    const Matrix proj = random_normal(8, 3, 1, rng);
    results["graph reasoning"] = check_gradients(
        ps,
        [&](ad::Tape& t) {
          const ad::Var mask = build_interaction_weights(t.param(prof), layout);
          const ad::Var a = masked_adjacency(mask, t.param(adj), AdjacencyMode::hadamard);
          const std::array<ad::Var, 2> ws{t.param(w0), t.param(w1)};
          return project(t, graph_reasoning(t.param(h0), a, ws), proj);
        },
        1.0, 1, 3);
  }
  {  // (d) the full three-stage denoiser on a 4-frame instance
    ModelConfig c;
    c.joints = 1;
    c.frames = 4;
    c.latent = 8;
    c.text_width = 8;
    c.text_ffn = 8;
    c.text_layers = 1;
    c.segments = 2;
    c.predictor_hidden = 6;
    Denoiser d(c, 24);
    std::mt19937_64 rng(24);
    const MotionPair x = gaussian_like(c.frames, c.motion_width(), rng);
    const Matrix p1 = random_normal(4, c.motion_width(), 1.0, rng);
    const Matrix p2 = random_normal(4, c.motion_width(), 1.0, rng);
    const HashEmbedder embedder(c.text_width);
    const TextBundle text = make_text_bundle(
        decompose_prompt("one person throws a ball, the other person catches it."), embedder);
    RowVector gt(2);
    gt << 0.7, 0.3;
    results["full denoiser"] = check_gradients(
        d.params(),
        [&](ad::Tape& t) {
          const auto out = d.forward(t, t.constant(x.person1), t.constant(x.person2), 300, text);
          ad::Var l = ad::add(project(t, out.person1, p1), project(t, out.person2, p2));
          return ad::add(l, distance_loss(out.profile, gt));
        },
        0.1, 300, 4);
  }

  bool pass = true;
  std::string detail;
  for (const auto& [name, r] : results) {
    pass = pass && r.max_rel_error <= 1e-3 && r.checked > 0;
    detail += name + " " + fmt(r.max_rel_error) + " (" + std::to_string(r.checked) + " entries); ";
  }
  return {pass, "max relative error: " + detail};
}

// ---------------------------------------------------------------------------
// 7. Learning at desk scale

double mean_abs_error(const Denoiser& model, const std::vector<TrainingExample>& examples,
                      const DiffusionSchedule& schedule, const std::vector<int>& timesteps,
                      std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double total = 0.0;
  long count = 0;
  for (const auto& ex : examples) {
    for (int t : timesteps) {
      const MotionPair noise = gaussian_like(static_cast<int>(ex.x0.person1.rows()),
                                             static_cast<int>(ex.x0.person1.cols()), rng);
      const MotionPair pred = model.predict(q_sample(ex.x0, t, noise, schedule), t, ex.text);
      total += (pred.person1 - ex.x0.person1).cwiseAbs().sum() +
               (pred.person2 - ex.x0.person2).cwiseAbs().sum();
      count += 2 * ex.x0.person1.size();
    }
  }
  return total / static_cast<double>(count);
}

std::vector<Sample> corpus(int count, std::uint64_t seed) {
  return synth_dataset(kScenarios, count, SynthOptions{}, seed);
}

std::string train_to(const Settings& settings, const RunConfig& config,
                     const std::vector<Sample>& data, const std::string& name) {
  const std::string path = (settings.workdir / name).string();
  TrainerOptions options;
  options.checkpoint_path = path;
  options.dump_path = path + ".nan.json";
  if (settings.verbose) {
    options.on_step = [name](const StepStats& s) {
      if (s.step % 1000 == 0)
        std::cerr << name << " step " << s.step << " loss " << s.loss << " recon " << s.recon << "\n";
    };
  }
  Trainer trainer(config, data, options);
  trainer.run();
  return path;
}

double heldout_metric(const std::string& ckpt_path, const std::vector<Sample>& held,
                      Metric metric, const std::string& name) {
  const ModelCheckpoint ckpt = load_checkpoint(ckpt_path);
  EvaluateOptions opts;
  opts.metrics = {metric};
  opts.seed = 9001;
  return evaluate_checkpoint(ckpt, held, opts).at(name);
}

Outcome desk_scale_learning(const Settings& settings) {
  // Part one: memorize a single batch of four samples.
  RunConfig over;
  over.seed = 11;
  over.optim.steps = settings.overfit_steps;
  over.optim.batch_size = 4;
  over.loss.condition_dropout = 0.0;
  over.optim.learning_rate = 2e-3;
  over.optim.final_learning_rate = 2e-4;
  const std::vector<Sample> batch = corpus(4, 12);
  Trainer trainer(over, batch);
  trainer.run();
  const std::vector<int> probe = sampling_timesteps(over.diffusion.steps, 10);
  const double l1 = mean_abs_error(trainer.model(), trainer.examples(), trainer.schedule(), probe, 13);
  const bool overfit_ok = l1 < 0.05 && settings.overfit_steps <= 2000;

  // Part two: conditioned model against a text-free baseline, same budget.
  const std::vector<Sample> train = corpus(settings.corpus_samples, 1);
  const std::vector<Sample> held = corpus(settings.heldout_samples, 777);
  RunConfig full;
  full.seed = 1;
  full.optim.steps = settings.corpus_steps;
  RunConfig base = full;
  base.model.use_text = false;
  const double full_mpjpe =
      heldout_metric(train_to(settings, full, train, "c7_full.ckpt"), held, Metric::mpjpe, "mpjpe");
  const double base_mpjpe =
      heldout_metric(train_to(settings, base, train, "c7_base.ckpt"), held, Metric::mpjpe, "mpjpe");
  const double ratio = full_mpjpe / base_mpjpe;
  const bool corpus_ok = ratio <= 0.7;

  return {overfit_ok && corpus_ok,
          "overfit L1 " + fmt(l1) + " after " + std::to_string(settings.overfit_steps) +
              " steps; held-out MPJPE full " + fmt(full_mpjpe) + " vs text-free " +
              fmt(base_mpjpe) + " (ratio " + fmt(ratio) + ", need <= 0.7) with " +
              std::to_string(settings.corpus_steps) + " steps on " +
              std::to_string(settings.corpus_samples) + " samples"};
}

// ---------------------------------------------------------------------------
// 8. Stage-two ablation

Outcome stage_two_ablation(const Settings& settings) {
  const std::vector<Sample> train = corpus(settings.corpus_samples, 1);
  const std::vector<Sample> held = corpus(settings.heldout_samples, 777);
  int wins = 0;
  std::string detail;
  for (int s = 0; s < settings.ablation_seeds; ++s) {
    RunConfig full;
    full.seed = 100 + static_cast<std::uint64_t>(s);
    full.optim.steps = settings.ablation_steps;
    RunConfig ablated = full;
    ablated.model.lambda_s2 = 0.0;
    ablated.loss.lambda_distance = 0.0;
    const std::string tag = std::to_string(s);
    const double e_full = heldout_metric(train_to(settings, full, train, "c8_full" + tag + ".ckpt"),
                                         held, Metric::mpjie, "mpjie_error");
    const double e_abl = heldout_metric(train_to(settings, ablated, train, "c8_nos2" + tag + ".ckpt"),
                                        held, Metric::mpjie, "mpjie_error");
    if (e_full < e_abl) ++wins;
    detail += "seed " + tag + ": " + fmt(e_full) + " vs " + fmt(e_abl) + "; ";
  }
  return {2 * wins > settings.ablation_seeds,
          "held-out |MPJIE - reference| full vs no stage 2 (" + std::to_string(settings.ablation_steps) +
              " steps): " + detail + "full better in " + std::to_string(wins) + "/" +
              std::to_string(settings.ablation_seeds)};
}

// ---------------------------------------------------------------------------
// 9. CLI determinism

std::string file_hash(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return hex64(fnv1a64(ss.str()));
}

// Runs every command in a fresh directory and hashes everything it leaves.
std::map<std::string, std::string> cli_run(const Settings& settings, const fs::path& dir,
                                           const std::vector<std::pair<std::string, std::string>>& steps,
                                           std::vector<std::string>& failures) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream cfg(dir / "run.json");
    cfg << R"({"optim": {"steps": 30, "batch_size": 4}, "seed": 3})";
  }
  for (const auto& [name, args] : steps) {
    const std::string cmd = "cd '" + dir.string() + "' && '" + settings.cli + "' " + args + " > " +
                            name + ".out 2>&1";
    if (std::system(cmd.c_str()) != 0) failures.push_back(name + " exited nonzero");
  }
  std::map<std::string, std::string> hashes;
  for (const auto& entry : fs::directory_iterator(dir))
    hashes[entry.path().filename().string()] = file_hash(entry.path());
  return hashes;
}

Outcome cli_determinism(const Settings& settings) {
  if (settings.cli.empty()) return {false, "no --cli given"};
  const std::vector<std::pair<std::string, std::string>> steps{
      {"synth-data", "synth-data --count 12 --out data.bin --seed 5"},
      {"train", "train --config run.json --data data.bin --out model.ckpt --log-every 10"},
      {"generate",
       "generate --ckpt model.ckpt --prompt 'two people walk toward each other.' --count 2 "
       "--sample-steps 5 --out gen.bin --seed 7"},
      {"train-evaluator", "train-evaluator --data data.bin --out eval.bin --steps 30 --seed 2"},
      {"evaluate",
       "evaluate --ckpt model.ckpt --data data.bin --metrics all --evaluator eval.bin --pool 4 "
       "--sample-steps 5 --report report --seed 4"},
      {"decompose",
       "decompose --prompt 'one person is crossing the legs, the other person takes a picture.'"},
      {"inspect-distance", "inspect-distance --data data.bin --ckpt model.ckpt --k 3"},
  };
  std::vector<std::string> failures;
  const auto a = cli_run(settings, settings.workdir / "c9_a", steps, failures);
  const auto b = cli_run(settings, settings.workdir / "c9_b", steps, failures);
  std::vector<std::string> differing;
  for (const auto& [file, hash] : a) {
    const auto it = b.find(file);
    if (it == b.end() || it->second != hash) differing.push_back(file);
  }
  if (a.size() != b.size()) differing.push_back("file sets differ");
  std::string detail = std::to_string(steps.size()) + " commands, " + std::to_string(a.size()) +
                       " outputs compared";
  for (const auto& f : failures) detail += "; " + f;
  for (const auto& f : differing) detail += "; differs: " + f;
  return {failures.empty() && differing.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  Settings settings;
  std::vector<int> selected;
  std::string workdir = (fs::temp_directory_path() / "duet_acceptance").string();
  app.add_option("--criterion", selected, "Criterion to run (repeatable; default all)")
      ->check(CLI::Range(1, 9));
  app.add_option("--cli", settings.cli, "Path of the duet executable");
  app.add_option("--workdir", workdir, "Scratch directory")->capture_default_str();
  app.add_option("--overfit-steps", settings.overfit_steps)->capture_default_str();
  app.add_option("--corpus-samples", settings.corpus_samples)->capture_default_str();
  app.add_option("--heldout-samples", settings.heldout_samples)->capture_default_str();
  app.add_option("--corpus-steps", settings.corpus_steps)->capture_default_str();
  app.add_option("--ablation-steps", settings.ablation_steps)->capture_default_str();
  app.add_option("--ablation-seeds", settings.ablation_seeds)->capture_default_str();
  app.add_flag("--verbose", settings.verbose, "Log training progress to stderr");
  CLI11_PARSE(app, argc, argv);
  settings.workdir = workdir;
  fs::create_directories(settings.workdir);

  const std::vector<std::function<Outcome(const Settings&)>> criteria{
      formula_oracles, default_constants,   interaction_mask,   decomposition,  residual_identity,
      gradient_checks, desk_scale_learning, stage_two_ablation, cli_determinism};
  if (selected.empty())
    for (int i = 1; i <= 9; ++i) selected.push_back(i);

  bool all = true;
  for (int n : selected) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[static_cast<std::size_t>(n - 1)](settings);
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << "criterion " << n << ": " << (out.pass ? "PASS" : "FAIL") << " - " << out.detail
              << " [" << fmt(secs) << " s]" << std::endl;
    all = all && out.pass;
  }
  return all ? 0 : 1;
}
