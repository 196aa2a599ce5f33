#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "cli.hpp"
#include "config_file.hpp"
#include "neuroflag/binary_io.hpp"
#include "neuroflag/cloth/simulator.hpp"
#include "neuroflag/cloth/topology.hpp"
#include "neuroflag/cloth/wind.hpp"
#include "neuroflag/dataset/csv_export.hpp"
#include "neuroflag/dataset/dataset_file.hpp"
#include "neuroflag/dataset/normalization.hpp"
#include "neuroflag/dataset/windows.hpp"
#include "neuroflag/diagnostics/gradcheck_suite.hpp"
#include "neuroflag/error.hpp"
#include "neuroflag/fingerprint.hpp"
#include "neuroflag/model/checkpoint.hpp"
#include "neuroflag/rollout/predictor.hpp"
#include "neuroflag/rollout/report.hpp"
#include "neuroflag/rollout/rollout.hpp"
#include "neuroflag/train/trainer.hpp"

namespace neuroflag::cli {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using cloth::WindCondition;

namespace {

// ---------------------------------------------------------------------------
// Resolved settings per subcommand.

struct SimulateArgs {
  cloth::ClothConfig cloth;
  std::string wind = "all";
  std::size_t frames = 6128;
  std::uint64_t seed = 42;
  double strong = cloth::default_strength(WindCondition::strong);
  double moderate = cloth::default_strength(WindCondition::moderate);
  std::string out = "out/frames";
  bool csv = false;
};

struct DatasetArgs {
  std::string frames_dir = "out/frames";
  std::string out = "out/dataset";
  std::size_t train_frames = 5064;
  std::size_t test_frames = 1064;
  std::size_t window = dataset::kHistoryLen;
  std::size_t stride = 1;
  double val_fraction = 0.1;
  std::size_t max_train_windows = 0;
  std::size_t max_val_windows = 0;
  std::uint64_t seed = 42;
};

struct TrainArgs {
  std::string data = "out/dataset";
  std::string out = "out/train";
  std::string resume;
  model::ModelConfig model;
  train::TrainConfig train;
  std::size_t log_every = 10;
};

struct RolloutArgs {
  std::string checkpoint = "out/train/model.nfck";
  std::string data = "out/dataset";
  std::string out = "out/rollout";
  std::string condition = "all";
  std::size_t frames = 1000;
  bool no_clamp_pole = false;
  bool traces = false;
};

struct EvalArgs {
  std::string checkpoint = "out/train/model.nfck";
  std::string data = "out/dataset";
  std::string report = "out/eval/report.json";
  std::size_t closed_loop_frames = 0;
  std::size_t batch = 32;
};

struct GradcheckArgs {
  double tolerance = 1e-3;
  double e2e_tol64 = 1e-4;
  double e2e_tol32 = 1e-2;
  std::uint64_t seed = 11;
};

// ---------------------------------------------------------------------------
// Shared helpers.

std::vector<WindCondition> parse_conditions(const std::string& name) {
  if (name == "all") return {cloth::kAllWindConditions.begin(), cloth::kAllWindConditions.end()};
  const auto c = cloth::parse_wind_condition(name);
  if (!c) throw UsageError("unknown wind condition '" + name + "' (expected strong, moderate, none or all)");
  return {*c};
}

std::string frames_file(const std::string& dir, WindCondition c) {
  return (fs::path(dir) / fmt::format("frames_{}.nflg", cloth::to_string(c))).string();
}

std::string test_frames_file(const std::string& dir, WindCondition c) {
  return (fs::path(dir) / fmt::format("test_frames_{}.nflg", cloth::to_string(c))).string();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
  io::write_file(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void require_file(const std::string& path) {
  if (!fs::exists(path)) throw IoError("required input " + path + " does not exist");
}

/// Provenance: resolved configuration next to the artifacts; wall-clock kept apart.
void write_provenance(const std::string& dir, const CLI::App& app, double seconds) {
  write_text((fs::path(dir) / "run_config.txt").string(),
             "# neuroflag " + app.get_name() + "\n" + resolved_config(app));
  write_text((fs::path(dir) / "timing.txt").string(), fmt::format("wall_seconds = {:.3f}\n", seconds));
}

/// Hash of the resolved settings, excluding file locations so relocated reruns stay byte-identical.
std::uint64_t settings_fingerprint(const CLI::App& app) {
  static const char* kPathKeys[] = {"out", "frames-dir", "data", "checkpoint", "report", "resume", "log-every"};
  std::string kept;
  std::istringstream lines(resolved_config(app));
  for (std::string line; std::getline(lines, line);) {
    const auto key = line.substr(0, line.find(' '));
    if (std::find(std::begin(kPathKeys), std::end(kPathKeys), key) == std::end(kPathKeys)) kept += line + "\n";
  }
  return fnv1a64(kept);
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

cloth::WindParams wind_for(WindCondition c, const SimulateArgs& a) {
  auto w = cloth::default_wind(c);
  if (c == WindCondition::strong) w.strength = a.strong;
  if (c == WindCondition::moderate) w.strength = a.moderate;
  return w;
}

// ---------------------------------------------------------------------------
// Commands.

void cmd_simulate(const SimulateArgs& a, const CLI::App& app) {
  const auto t0 = Clock::now();
  a.cloth.validate();
  if (a.frames < 1) throw UsageError("--frames must be >= 1");
  const auto conditions = parse_conditions(a.wind);
  ensure_dir(a.out);
  const auto topo = cloth::SpringTopology::grid(a.cloth.rows, a.cloth.cols, a.cloth.spacing);
  const auto fingerprint = settings_fingerprint(app);
  for (auto c : conditions) {
    const auto wind = wind_for(c, a);
    const auto result = cloth::simulate(a.cloth, wind, topo, a.frames, a.seed);
    const auto frames = dataset::to_frames(result.states, c);
    dataset::save_frames(frames_file(a.out, c), frames, fingerprint, wind.strength);
    if (a.csv) dataset::export_frames_csv(frames, (fs::path(a.out) / fmt::format("csv_{}", cloth::to_string(c))).string());
    fmt::print("simulated {:<8} {} frames (degenerate springs skipped: {}) -> {}\n", cloth::to_string(c),
               frames.size(), result.degenerate_springs, frames_file(a.out, c));
  }
  write_provenance(a.out, app, seconds_since(t0));
}

void cmd_make_dataset(const DatasetArgs& a, const CLI::App& app) {
  const auto t0 = Clock::now();
  if (a.window == 0 || a.stride == 0) throw UsageError("--window and --stride must be >= 1");

  std::vector<dataset::FrameSequence> runs;
  std::vector<dataset::ConditionEntry> conditions;
  for (auto c : cloth::kAllWindConditions) {
    const auto path = frames_file(a.frames_dir, c);
    if (!fs::exists(path)) continue;
    dataset::DatasetHeader h;
    runs.push_back(dataset::load_frames(path, &h));
    conditions.push_back(h.conditions.front());
  }
  if (runs.empty()) throw IoError("no frames_<condition>.nflg files found in " + a.frames_dir);
  for (const auto& r : runs) {
    if (r.size() < a.train_frames + a.test_frames) {
      throw UsageError(fmt::format("{} run has {} frames; --train-frames + --test-frames needs {}",
                                   cloth::to_string(r.condition), r.size(), a.train_frames + a.test_frames));
    }
  }

  const auto transform = dataset::fit_normalization(runs);
  const auto fingerprint = settings_fingerprint(app);
  ensure_dir(a.out);

  std::optional<dataset::WindowSet> pool;
  std::optional<dataset::WindowSet> test;
  for (const auto& r : runs) {
    dataset::FrameSequence train_part = r;
    train_part.xyz.assign(r.xyz.begin(), r.xyz.begin() + static_cast<std::ptrdiff_t>(a.train_frames * r.frame_floats()));
    dataset::FrameSequence test_part = r;
    test_part.first_step = r.first_step + a.train_frames;
    test_part.xyz.assign(r.xyz.begin() + static_cast<std::ptrdiff_t>(a.train_frames * r.frame_floats()),
                         r.xyz.begin() + static_cast<std::ptrdiff_t>((a.train_frames + a.test_frames) * r.frame_floats()));

    auto w = dataset::make_windows(train_part, transform, a.window, a.stride);
    auto tw = dataset::make_windows(test_part, transform, a.window, a.stride);
    fmt::print("{:<8} train pool {} windows, test {} windows\n", cloth::to_string(r.condition), w.size(), tw.size());
    if (pool) pool->extend(w); else pool.emplace(std::move(w));
    if (test) test->extend(tw); else test.emplace(std::move(tw));

    dataset::FrameSequence normalized = test_part;
    normalized.xyz = transform.apply(test_part.xyz);
    dataset::save_frames(test_frames_file(a.out, r.condition), normalized, fingerprint,
                         conditions[static_cast<std::size_t>(&r - runs.data())].strength);
  }

  auto split = dataset::split_train_val(pool->size(), a.val_fraction, a.seed);
  if (a.max_train_windows != 0 && split.train.size() > a.max_train_windows) split.train.resize(a.max_train_windows);
  if (a.max_val_windows != 0 && split.val.size() > a.max_val_windows) split.val.resize(a.max_val_windows);
  dataset::save_windows((fs::path(a.out) / "train.nflg").string(), *pool, fingerprint, conditions, split.train);
  dataset::save_windows((fs::path(a.out) / "val.nflg").string(), *pool, fingerprint, conditions, split.val);
  dataset::save_windows((fs::path(a.out) / "test.nflg").string(), *test, fingerprint, conditions);
  fmt::print("dataset: {} total windows, {} train, {} val, {} test -> {}\n", pool->size(), split.train.size(),
             split.val.size(), test->size(), a.out);
  write_provenance(a.out, app, seconds_since(t0));
}

dataset::WindowSet load_split(const std::string& dir, const char* name) {
  const auto path = (fs::path(dir) / name).string();
  require_file(path);
  return dataset::load_windows(path);
}

void append_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot append to " + path);
  out << text;
}

void cmd_train(TrainArgs a, const CLI::App& app) {
  const auto t0 = Clock::now();
  const auto train_set = load_split(a.data, "train.nflg");
  const auto val_set = load_split(a.data, "val.nflg");
  a.model.grid_rows = train_set.rows();
  a.model.grid_cols = train_set.cols();
  a.model.history_len = train_set.history_len();
  a.model.validate();
  a.train.validate();
  ensure_dir(a.out);

  train::Trainer trainer(a.model, a.train, train_set, &val_set);
  const auto loss_csv = (fs::path(a.out) / "loss.csv").string();
  const auto save = [&](const model::Checkpoint& c, const std::string& name) {
    model::save_checkpoint(c, (fs::path(a.out) / name).string());
  };
  if (!a.resume.empty()) {
    trainer.resume(model::load_checkpoint(a.resume, &a.model));
    fmt::print("resumed from {} at step {}\n", a.resume, trainer.steps_done());
  }
  const bool fresh_log = a.resume.empty() || !fs::exists(loss_csv);
  if (fresh_log) write_text(loss_csv, "step,train_loss,val_loss\n");

  const std::size_t total = trainer.total_steps();
  fmt::print("training {} parameters, {} windows, {} steps/epoch, {} steps\n", trainer.params().parameter_count(),
             train_set.size(), trainer.steps_per_epoch(), total);
  std::size_t flushed = 0;
  const auto flush_log = [&] {
    train::TrainLog chunk;
    chunk.entries.assign(trainer.log().entries.begin() + static_cast<std::ptrdiff_t>(flushed),
                         trainer.log().entries.end());
    append_file(loss_csv, chunk.to_csv(false));
    flushed = trainer.log().entries.size();
  };
  try {
    while (trainer.steps_done() < total) {
      const double loss = trainer.step();
      const auto s = trainer.steps_done();
      const auto& last = trainer.log().entries.back();
      if (a.log_every != 0 && (s % a.log_every == 0 || last.val_loss)) {
        fmt::print("step {:>6}/{} loss {:.6f}{}  ({:.1f} s)\n", s, total, loss,
                   last.val_loss ? fmt::format(" val {:.6f}", *last.val_loss) : "", seconds_since(t0));
        std::fflush(stdout);
      }
      if (a.train.checkpoint_interval != 0 && s % a.train.checkpoint_interval == 0 && s < total) {
        flush_log();
        save(trainer.checkpoint(), "latest.nfck");
      }
    }
  } catch (const DivergenceError&) {
    flush_log();
    save(trainer.checkpoint(), "last_good.nfck");
    throw;
  }
  flush_log();
  const double val = trainer.validation_loss();
  append_file(loss_csv, fmt::format("{},,{:.9g}\n", trainer.steps_done(), val));
  save(trainer.checkpoint(), "model.nfck");
  fmt::print("final validation loss {:.6f} -> {}\n", val, (fs::path(a.out) / "model.nfck").string());
  write_provenance(a.out, app, seconds_since(t0));
}

rollout::ModelPredictor load_predictor(const std::string& path) {
  require_file(path);
  auto ckpt = model::load_checkpoint(path);
  return rollout::ModelPredictor(ckpt.config, std::move(ckpt.params));
}

void cmd_rollout(const RolloutArgs& a, const CLI::App& app) {
  const auto t0 = Clock::now();
  auto predictor = load_predictor(a.checkpoint);
  ensure_dir(a.out);
  rollout::RolloutOptions opts;
  opts.clamp_pole = !a.no_clamp_pole;
  std::vector<rollout::RolloutReport> reports;
  for (auto c : parse_conditions(a.condition)) {
    const auto path = test_frames_file(a.data, c);
    if (!fs::exists(path)) {
      if (a.condition == "all") continue;
      throw IoError("required input " + path + " does not exist");
    }
    dataset::DatasetHeader h;
    const auto truth = dataset::load_frames(path, &h);
    opts.rows = truth.rows;
    opts.cols = truth.cols;
    const std::size_t h_len = predictor.history_len();
    if (truth.size() < h_len) throw UsageError("test frames are shorter than one history window");
    const auto seed = std::span<const float>(truth.xyz).first(h_len * truth.frame_floats());
    const auto frames = rollout::rollout(predictor, seed, a.frames, c, opts);

    float lo = 0.0f, hi = 0.0f;
    if (!frames.xyz.empty()) {
      const auto [mn, mx] = std::minmax_element(frames.xyz.begin(), frames.xyz.end());
      lo = *mn;
      hi = *mx;
    }
    dataset::save_frames((fs::path(a.out) / fmt::format("rollout_{}.nflg", cloth::to_string(c))).string(), frames,
                         h.fingerprint, h.conditions.front().strength);
    if (a.traces) {
      rollout::per_particle_traces(frames, (fs::path(a.out) / fmt::format("traces_{}", cloth::to_string(c))).string());
    }
    const std::size_t scored = std::min(a.frames, truth.size() - h_len);
    if (scored > 0) {
      auto r = rollout::compare_rollout_to_oracle(predictor, truth, 0, scored, opts);
      reports.push_back(std::move(r));
    }
    fmt::print("rollout {:<8} {} frames, coordinate range [{:.4f}, {:.4f}]\n", cloth::to_string(c), frames.size(), lo,
               hi);
  }
  if (reports.empty()) throw IoError("no test_frames_<condition>.nflg found in " + a.data);
  rollout::write_reports_json(reports, (fs::path(a.out) / "rollout_report.json").string());
  fmt::print("{}", rollout::format_report_table(reports));
  write_provenance(a.out, app, seconds_since(t0));
}

void cmd_eval(const EvalArgs& a, const CLI::App& app) {
  const auto t0 = Clock::now();
  auto predictor = load_predictor(a.checkpoint);
  const auto test = load_split(a.data, "test.nflg");
  auto reports = rollout::teacher_forced_errors(predictor, test, a.batch);
  if (a.closed_loop_frames > 0) {
    for (auto c : cloth::kAllWindConditions) {
      const auto path = test_frames_file(a.data, c);
      if (!fs::exists(path)) continue;
      const auto truth = dataset::load_frames(path);
      rollout::RolloutOptions opts;
      opts.rows = truth.rows;
      opts.cols = truth.cols;
      const std::size_t n = std::min(a.closed_loop_frames, truth.size() - predictor.history_len());
      reports.push_back(rollout::compare_rollout_to_oracle(predictor, truth, 0, n, opts));
    }
  }
  const auto dir = fs::path(a.report).parent_path().string();
  if (!dir.empty()) ensure_dir(dir);
  rollout::write_reports_json(reports, a.report);
  fmt::print("{}", rollout::format_report_table(reports));
  write_provenance(dir.empty() ? "." : dir, app, seconds_since(t0));
}

int cmd_gradcheck(const GradcheckArgs& a) {
  auto cases = diagnostics::op_gradchecks(a.tolerance, a.seed);
  auto e2e = diagnostics::end_to_end_gradchecks(a.e2e_tol64, a.e2e_tol32, a.seed);
  cases.insert(cases.end(), e2e.begin(), e2e.end());
  bool ok = true;
  fmt::print("{:<22} {:<5} {:>12} {:>10} {:>9}  result\n", "case", "prec", "max_rel_err", "tolerance", "elements");
  for (const auto& c : cases) {
    fmt::print("{:<22} {:<5} {:>12.3e} {:>10.1e} {:>9}  {}\n", c.name, c.precision, c.result.max_relative_error,
               c.tolerance, c.result.elements_checked, c.passed() ? "pass" : "FAIL");
    ok = ok && c.passed();
  }
  return ok ? kExitOk : kExitInternal;
}

// ---------------------------------------------------------------------------
// Option registration.

void add_cloth_options(CLI::App* s, cloth::ClothConfig& c) {
  s->add_option("--spring-constant", c.spring_constant, "Spring stiffness K");
  s->add_option("--damper-constant", c.damper_constant, "Damping coefficient D");
  s->add_option("--mass", c.particle_mass, "Particle mass m");
  s->add_option("--gravity", c.gravity, "Gravitational acceleration along y");
  s->add_option("--dt", c.dt, "Integrator time step");
  s->add_option("--spacing", c.spacing, "Rest distance between neighboring particles");
  s->add_option("--warmup", c.warmup_steps, "Steps discarded before recording");
  s->add_option("--jitter", c.initial_jitter, "Amplitude of the initial out-of-plane perturbation");
}

void add_model_options(CLI::App* s, model::ModelConfig& m) {
  s->add_option("--layers", m.num_layers, "Transformer blocks");
  s->add_option("--dim", m.projection_dim, "Projection width d");
  s->add_option("--heads", m.num_heads, "Attention heads");
  s->add_option("--mlp-expansion", m.mlp_expansion, "MLP hidden width as a multiple of d");
  s->add_option("--dropout", m.dropout_rate, "Attention-weight dropout rate");
  s->add_option("--ln-eps", m.layer_norm_eps, "Layer-norm epsilon");
}

void add_train_options(CLI::App* s, train::TrainConfig& t) {
  s->add_option("--batch-size", t.batch_size, "Mini-batch size");
  s->add_option("--huber-delta", t.huber_delta, "Huber loss knee");
  s->add_option("--lr", t.adam.learning_rate, "Adam learning rate");
  s->add_option("--beta1", t.adam.beta1, "Adam first-moment decay");
  s->add_option("--beta2", t.adam.beta2, "Adam second-moment decay");
  s->add_option("--adam-eps", t.adam.epsilon, "Adam epsilon");
  s->add_option("--epochs", t.epochs, "Epochs over the training windows");
  s->add_option("--max-steps", t.max_steps, "Optimizer steps; overrides --epochs when non-zero");
  s->add_option("--val-interval", t.val_interval, "Steps between validation evaluations");
  s->add_option("--checkpoint-interval", t.checkpoint_interval, "Steps between latest.nfck checkpoints (0: off)");
  s->add_option("--seed", t.seed, "Seed for initialization, shuffling and dropout");
}

int exit_for_parse_error(const CLI::App& app, const CLI::ParseError& e) {
  const int code = app.exit(e);
  return code == 0 ? kExitOk : kExitUsage;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"neuroflag: mass-spring flag simulation and trajectory-transformer surrogate"};
  app.name(args.empty() ? "neuroflag" : fs::path(args.front()).filename().string());
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  SimulateArgs sim;
  DatasetArgs ds;
  TrainArgs tr;
  RolloutArgs ro;
  EvalArgs ev;
  GradcheckArgs gc;
  std::map<const CLI::App*, std::string> config_paths;

  const auto with_config = [&](CLI::App* s) {
    s->add_option("--config", config_paths[s], "Flat key = value file; command-line flags take precedence");
    return s;
  };

  auto* s_sim = with_config(app.add_subcommand("simulate", "Run the cloth simulator for one or all wind conditions"));
  add_cloth_options(s_sim, sim.cloth);
  s_sim->add_option("--wind", sim.wind, "strong, moderate, none or all");
  s_sim->add_option("--frames", sim.frames, "Frames recorded after warm-up");
  s_sim->add_option("--seed", sim.seed, "Seed for the initial perturbation");
  s_sim->add_option("--strong-strength", sim.strong, "Wind strength of the strong condition");
  s_sim->add_option("--moderate-strength", sim.moderate, "Wind strength of the moderate condition");
  s_sim->add_option("--out", sim.out, "Output directory");
  s_sim->add_flag("--csv", sim.csv, "Also export per-frame CSV files");

  auto* s_ds = with_config(app.add_subcommand("make-dataset", "Normalize frames and cut train/val/test windows"));
  s_ds->add_option("--frames-dir", ds.frames_dir, "Directory written by simulate");
  s_ds->add_option("--out", ds.out, "Output directory");
  s_ds->add_option("--train-frames", ds.train_frames, "Leading frames per run used for train/val windows");
  s_ds->add_option("--test-frames", ds.test_frames, "Following frames per run held out for testing");
  s_ds->add_option("--window", ds.window, "History length in frames");
  s_ds->add_option("--stride", ds.stride, "Window stride");
  s_ds->add_option("--val-fraction", ds.val_fraction, "Fraction of pooled windows used for validation");
  s_ds->add_option("--max-train-windows", ds.max_train_windows, "Cap on training windows (0: all)");
  s_ds->add_option("--max-val-windows", ds.max_val_windows, "Cap on validation windows (0: all)");
  s_ds->add_option("--seed", ds.seed, "Seed for the train/val split");

  auto* s_tr = with_config(app.add_subcommand("train", "Train the trajectory transformer"));
  s_tr->add_option("--data", tr.data, "Directory written by make-dataset");
  s_tr->add_option("--out", tr.out, "Output directory");
  s_tr->add_option("--resume", tr.resume, "Checkpoint to continue from");
  s_tr->add_option("--log-every", tr.log_every, "Steps between progress lines (0: quiet)");
  add_model_options(s_tr, tr.model);
  add_train_options(s_tr, tr.train);

  auto* s_ro = with_config(app.add_subcommand("rollout", "Closed-loop prediction from held-out seed windows"));
  s_ro->add_option("--checkpoint", ro.checkpoint, "Trained model checkpoint");
  s_ro->add_option("--data", ro.data, "Directory written by make-dataset");
  s_ro->add_option("--out", ro.out, "Output directory");
  s_ro->add_option("--condition", ro.condition, "strong, moderate, none or all");
  s_ro->add_option("--frames", ro.frames, "Frames to predict");
  s_ro->add_flag("--no-clamp-pole", ro.no_clamp_pole, "Do not re-impose pole positions on predictions");
  s_ro->add_flag("--traces", ro.traces, "Write per-particle t,x,y,z traces");

  auto* s_ev = with_config(app.add_subcommand("eval", "Teacher-forced error per wind condition"));
  s_ev->add_option("--checkpoint", ev.checkpoint, "Trained model checkpoint");
  s_ev->add_option("--data", ev.data, "Directory written by make-dataset");
  s_ev->add_option("--report", ev.report, "JSON report path");
  s_ev->add_option("--closed-loop-frames", ev.closed_loop_frames, "Also score closed-loop rollouts of this length");
  s_ev->add_option("--batch", ev.batch, "Inference batch size");

  auto* s_gc = with_config(app.add_subcommand("gradcheck", "Finite-difference check of every differentiable op"));
  s_gc->add_option("--tolerance", gc.tolerance, "Per-op relative error bound (64-bit)");
  s_gc->add_option("--e2e-tol64", gc.e2e_tol64, "End-to-end bound, 64-bit");
  s_gc->add_option("--e2e-tol32", gc.e2e_tol32, "End-to-end bound, 32-bit");
  s_gc->add_option("--seed", gc.seed, "Seed for the random probes");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    return exit_for_parse_error(app, e);
  }

  CLI::App* active = app.get_subcommands().front();
  try {
    const auto& cfg = config_paths[active];
    if (!cfg.empty()) apply_config_file(*active, read_config_file(cfg));

    if (active == s_sim) cmd_simulate(sim, *active);
    if (active == s_ds) cmd_make_dataset(ds, *active);
    if (active == s_tr) cmd_train(tr, *active);
    if (active == s_ro) cmd_rollout(ro, *active);
    if (active == s_ev) cmd_eval(ev, *active);
    if (active == s_gc) return cmd_gradcheck(gc);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    return exit_for_parse_error(app, e);
  } catch (const DivergenceError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitDiverged;
  } catch (const UsageError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitUsage;
  } catch (const ParameterError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitUsage;
  } catch (const ConfigMismatchError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitUsage;
  } catch (const IoError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitUsage;
  } catch (const FormatError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    fmt::print(stderr, "internal error: {}\n", e.what());
    return kExitInternal;
  }
}

int run(int argc, char** argv) {
  return run(std::vector<std::string>(argv, argv + argc));
}

}  // namespace neuroflag::cli
