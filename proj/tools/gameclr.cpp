// gameclr: command-line laboratory for contrastive learning on procedurally
// rendered driving scenes. Subcommands cover dataset generation, SimCLR and
// GameCLR training, linear probing of frozen representations, SVG plots of
// training curves, and a one-shot experiment pipeline with a hashed manifest.

#include <CLI11.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "gameclr/config.hpp"
#include "gameclr/dataio.hpp"
#include "gameclr/probe.hpp"
#include "gameclr/render.hpp"
#include "gameclr/scene.hpp"
#include "gameclr/svg.hpp"
#include "gameclr/training.hpp"

namespace fs = std::filesystem;
using namespace gameclr;

namespace {

// Exit codes: 0 ok, 2 usage/config, 3 I/O, 4 data or method mismatch,
// 5 numerical failure. Everything not listed below is a data problem.
int exit_code_for(const Error& e) {
  if (dynamic_cast<const ConfigError*>(&e) != nullptr ||
      dynamic_cast<const InvalidPolicy*>(&e) != nullptr ||
      dynamic_cast<const NonPositiveTemperature*>(&e) != nullptr ||
      dynamic_cast<const BatchTooSmall*>(&e) != nullptr ||
      dynamic_cast<const EmptyPositiveSet*>(&e) != nullptr ||
      dynamic_cast<const EmptyEmbedding*>(&e) != nullptr)
    return 2;
  if (dynamic_cast<const IoError*>(&e) != nullptr) return 3;
  if (dynamic_cast<const NonFiniteLoss*>(&e) != nullptr ||
      dynamic_cast<const NumericalError*>(&e) != nullptr ||
      dynamic_cast<const SingularSystem*>(&e) != nullptr ||
      dynamic_cast<const ZeroVector*>(&e) != nullptr)
    return 5;
  return 4;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr) throw IoError("sha256 context allocation failed");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw IoError("sha256 digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

std::string gen_config_value(const DatasetBundle& b, const std::string& key) {
  for (const auto& [k, v] : b.gen_config)
    if (k == key) return v;
  return {};
}

// Renders a complete dataset for one of the three modes. Scene seeds reuse
// the per-anchor stream layout of the training-time batch builder, so frozen
// and fresh training see identically distributed scenes.
DatasetBundle generate_dataset(const std::string& mode, int anchors, std::uint64_t seed, int kp,
                               int kn) {
  if (anchors < 0) throw ConfigError("anchors must be >= 0");
  const bool gameclr_mode = mode == "gameclr";
  if (gameclr_mode && (kp < 1 || kn < 1))
    throw ConfigError("gameclr datasets need --kp >= 1 and --kn >= 1");
  // Probe scenes may fill every lane; training scenes keep one lane free so
  // the scene-altering augment always has room to add a vehicle.
  const int max_vehicles = mode == "probe" ? kNumLanes : kNumLanes - 1;

  DatasetBundle b;
  b.gen_config.emplace_back("mode", mode);
  b.gen_config.emplace_back("anchors", std::to_string(anchors));
  b.gen_config.emplace_back("seed", std::to_string(seed));
  b.gen_config.emplace_back("max_vehicles", std::to_string(max_vehicles));
  if (gameclr_mode) {
    b.gen_config.emplace_back("kp", std::to_string(kp));
    b.gen_config.emplace_back("kn", std::to_string(kn));
  }

  const auto push = [&b](int anchor_id, Role role, const SceneState& s) {
    b.groups.push_back({anchor_id, role, static_cast<int>(b.images.size())});
    b.images.push_back(render(s));
    b.labels.push_back(traffic_variables(s));
  };

  for (int i = 0; i < anchors; ++i) {
    const std::uint64_t si = fold_seed(seed, static_cast<std::uint64_t>(i));
    const SceneState anchor = sample_scene(si, max_vehicles);
    push(i, Role::anchor, anchor);
    if (gameclr_mode) {
      for (int j = 0; j < kp; ++j)
        push(i, Role::syn_pos,
             scene_preserving_augment(anchor, fold_seed(si, detail::kSlotPosScene + j)));
      for (int j = 0; j < kn; ++j)
        push(i, Role::syn_neg,
             scene_altering_augment(anchor, fold_seed(si, detail::kSlotNegScene + j)));
    }
  }
  return b;
}

void print_epoch(const TrainLogRecord& r, int total_epochs) {
  std::printf("  epoch %3d/%d  loss %.4f  cos_pos %.4f  cos_neg_reg %.4f", r.epoch, total_epochs,
              r.loss, r.cos_pos, r.cos_neg_reg);
  if (r.cos_neg_syn.has_value()) std::printf("  cos_neg_syn %.4f", *r.cos_neg_syn);
  if (r.seconds > 0.0) std::printf("  (%.1fs)", r.seconds);
  std::printf("\n");
  std::fflush(stdout);
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------
struct GenArgs {
  std::string out;
  std::string mode = "gameclr";
  int anchors = 2000;
  std::uint64_t seed = 42;
  int kp = 2;
  int kn = 2;
};

int run_gen(const GenArgs& a) {
  const DatasetBundle b = generate_dataset(a.mode, a.anchors, a.seed, a.kp, a.kn);
  write_dataset(b, a.out);
  std::printf("wrote %zu images (%s mode, %d anchors) to %s\n", b.images.size(), a.mode.c_str(),
              a.anchors, a.out.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------
struct TrainArgs {
  std::string data;
  std::string method;
  std::string out;
  std::string log;
  std::string config_file;
  std::vector<std::string> overrides;  // key=value pairs applied after the file
  // Dedicated flag storage; applied only when the flag was actually given.
  int epochs = 0;
  int anchors_per_epoch = 0;
  int batch_size = 0;
  double lr = 0.0;
  double temperature = 0.0;
  int kp = 0;
  int kn = 0;
  std::uint64_t seed = 0;
  int max_vehicles = 0;
  bool frozen_data = false;
  bool record_timing = false;
};

// Flag-presence-gated config patches, filled in while wiring up the parser.
using ConfigPatch = std::pair<CLI::Option*, std::function<void(ExperimentConfig&)>>;

void apply_override(ExperimentConfig& cfg, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos)
    throw ConfigError("--set expects key=value, got '" + kv + "'");
  apply_config_entry(cfg, kv.substr(0, eq), kv.substr(eq + 1));
}

int run_train(const TrainArgs& a, const std::vector<ConfigPatch>& patches) {
  ExperimentConfig cfg =
      a.config_file.empty() ? ExperimentConfig{} : parse_config_file(a.config_file);
  for (const std::string& kv : a.overrides) apply_override(cfg, kv);
  for (const auto& [opt, patch] : patches)
    if (opt->count() > 0) patch(cfg);

  const Method method = parse_method(a.method);
  const TrainConfig tc = cfg.to_train_config(method);
  require_valid_train_config(tc);

  const DatasetBundle bundle = read_dataset(a.data);
  const std::string mode = gen_config_value(bundle, "mode");
  if (mode.empty())
    throw DatasetMethodMismatch("dataset at " + a.data + " carries no mode tag");
  if (mode != method_name(method))
    throw DatasetMethodMismatch("dataset mode '" + mode + "' does not match training method '" +
                                std::string(method_name(method)) + "'");

  std::printf("training %s: %d epochs x %d anchors, batch %d, tau %g, seed %llu%s\n",
              method_name(method), tc.epochs, tc.anchors_per_epoch, tc.loss.batch_size,
              tc.loss.temperature, static_cast<unsigned long long>(tc.seed),
              tc.frozen_data ? " (frozen data)" : "");
  const TrainResult res =
      train(tc, &bundle, [&](const TrainLogRecord& r) { print_epoch(r, tc.epochs); });

  save_checkpoint(res.model, a.out);
  write_train_log(res.log, a.log);
  std::printf("wrote checkpoint %s and log %s\n", a.out.c_str(), a.log.c_str());
  if (res.degenerate_embeddings > 0)
    std::fprintf(stderr, "warning: %ld degenerate (near-zero) embeddings hit the fallback axis\n",
                 res.degenerate_embeddings);
  return 0;
}

// ---------------------------------------------------------------------------
// probe
// ---------------------------------------------------------------------------
struct ProbeArgs {
  std::vector<std::string> models;  // untrained, simclr, gameclr
  std::string data;
  std::string out;
  int runs = 5;
  double lambda = 1.0;
  double test_fraction = 0.2;
  std::uint64_t seed = 42;
  bool probe_embeddings = false;
};

int run_probe_cmd(const ProbeArgs& a) {
  const DatasetBundle bundle = read_dataset(a.data);
  const std::string mode = gen_config_value(bundle, "mode");
  if (mode != "probe")
    throw DatasetMethodMismatch("probing needs a probe-mode dataset, got mode '" + mode + "'");
  const ProbeDataset ds = make_probe_dataset(bundle);

  const Model<float> untrained = load_checkpoint(a.models[0]);
  const Model<float> simclr = load_checkpoint(a.models[1]);
  const Model<float> gameclr_model = load_checkpoint(a.models[2]);

  ProbeConfig pc;
  pc.runs = a.runs;
  pc.lambda = a.lambda;
  pc.test_fraction = a.test_fraction;
  pc.seed = a.seed;
  pc.probe_embeddings = a.probe_embeddings;

  const ProbeReport report = run_probe(untrained, simclr, gameclr_model, ds, pc);
  render_report(report, a.out);

  const std::string table = detail::read_file(report_table_path(a.out));
  std::fwrite(table.data(), 1, table.size(), stdout);
  std::printf("wrote %s, %s, %s\n", a.out.c_str(),
              report_summary_path(a.out).string().c_str(),
              report_table_path(a.out).string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// plot
// ---------------------------------------------------------------------------
struct PlotArgs {
  std::string log;
  std::string log2;
  std::string out;
};

int run_plot(const PlotArgs& a) {
  std::vector<std::pair<std::string, std::vector<TrainLogRecord>>> logs;
  logs.emplace_back(fs::path(a.log).stem().string(), read_train_log(a.log));
  if (!a.log2.empty()) logs.emplace_back(fs::path(a.log2).stem().string(), read_train_log(a.log2));
  write_svg_plot(logs, a.out);
  std::printf("wrote %s\n", a.out.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// experiment
// ---------------------------------------------------------------------------
struct ExperimentArgs {
  std::string config_file;
  std::string out;
  std::vector<std::string> overrides;
};

// Per-stage seed salts keep the three generated datasets, the shared model
// init, and the training streams statistically independent.
constexpr std::uint64_t kGenSimclrSalt = 0x6e51;
constexpr std::uint64_t kGenGameclrSalt = 0x6e52;
constexpr std::uint64_t kGenProbeSalt = 0x6e53;

int run_experiment(const ExperimentArgs& a) {
  ExperimentConfig cfg = parse_config_file(a.config_file);
  for (const std::string& kv : a.overrides) apply_override(cfg, kv);
  require_valid_experiment_config(cfg);
  const fs::path out(a.out);
  detail::ensure_dir(out);

  std::printf("[1/5] generating datasets\n");
  std::fflush(stdout);
  const DatasetBundle data_simclr = generate_dataset(
      "simclr", cfg.train_data_anchors, fold_seed(cfg.seed, kGenSimclrSalt), cfg.k_p, cfg.k_n);
  write_dataset(data_simclr, out / "data_simclr");
  const DatasetBundle data_gameclr = generate_dataset(
      "gameclr", cfg.train_data_anchors, fold_seed(cfg.seed, kGenGameclrSalt), cfg.k_p, cfg.k_n);
  write_dataset(data_gameclr, out / "data_gameclr");
  const DatasetBundle data_probe =
      generate_dataset("probe", cfg.probe_anchors, fold_seed(cfg.seed, kGenProbeSalt), 0, 0);
  write_dataset(data_probe, out / "data_probe");

  std::printf("[2/5] training simclr\n");
  std::fflush(stdout);
  const TrainConfig tc_s = cfg.to_train_config(Method::simclr);
  require_valid_train_config(tc_s);
  const TrainResult res_s =
      train(tc_s, &data_simclr, [&](const TrainLogRecord& r) { print_epoch(r, tc_s.epochs); });
  save_checkpoint(res_s.model, out / "simclr.bin");
  write_train_log(res_s.log, out / "simclr_log.csv");

  std::printf("[3/5] training gameclr\n");
  std::fflush(stdout);
  const TrainConfig tc_g = cfg.to_train_config(Method::gameclr);
  require_valid_train_config(tc_g);
  const TrainResult res_g =
      train(tc_g, &data_gameclr, [&](const TrainLogRecord& r) { print_epoch(r, tc_g.epochs); });
  save_checkpoint(res_g.model, out / "gameclr.bin");
  write_train_log(res_g.log, out / "gameclr_log.csv");

  // The untrained baseline is the shared starting point of both trainings:
  // same seed, same init stream.
  Model<float> untrained;
  untrained.init(fold_seed(cfg.seed, detail::kInitSalt));
  save_checkpoint(untrained, out / "untrained.bin");

  std::printf("[4/5] probing\n");
  std::fflush(stdout);
  const ProbeDataset ds = make_probe_dataset(data_probe);
  const ProbeReport report = run_probe(untrained, res_s.model, res_g.model, ds,
                                       cfg.to_probe_config());
  render_report(report, out / "report.csv");
  const std::string table = detail::read_file(report_table_path(out / "report.csv"));
  std::fwrite(table.data(), 1, table.size(), stdout);

  std::printf("[5/5] plotting and hashing\n");
  std::fflush(stdout);
  write_svg_plot({{"gameclr", res_g.log}}, out / "fig2.svg");

  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(out)) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), out);
    if (rel == "manifest.txt") continue;
    files.push_back(rel);
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& x, const fs::path& y) { return x.generic_string() < y.generic_string(); });
  std::string manifest;
  for (const fs::path& rel : files)
    manifest += sha256_hex(detail::read_file(out / rel)) + "  " + rel.generic_string() + "\n";
  detail::write_file(out / "manifest.txt", manifest);
  std::printf("wrote %zu artifacts + manifest.txt to %s\n", files.size(), a.out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"contrastive learning laboratory on procedurally rendered driving scenes"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  app.footer("environment: GCLR_THREADS caps the worker thread count (default: all cores)");

  GenArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen", "generate a dataset directory");
  gen->add_option("--out", gen_args.out, "output dataset directory")->required();
  gen->add_option("--mode", gen_args.mode, "dataset flavor")
      ->check(CLI::IsMember({"simclr", "gameclr", "probe"}));
  gen->add_option("--anchors", gen_args.anchors, "number of anchor scenes");
  gen->add_option("--seed", gen_args.seed, "generation seed");
  gen->add_option("--kp", gen_args.kp, "synthetic positives per anchor (gameclr mode)");
  gen->add_option("--kn", gen_args.kn, "synthetic negatives per anchor (gameclr mode)");

  TrainArgs train_args;
  CLI::App* tr = app.add_subcommand("train", "train a contrastive model");
  tr->add_option("--data", train_args.data, "dataset directory (mode must match --method)")
      ->required();
  tr->add_option("--method", train_args.method, "training method")
      ->required()
      ->check(CLI::IsMember({"simclr", "gameclr"}));
  tr->add_option("--out", train_args.out, "output checkpoint path")->required();
  tr->add_option("--log", train_args.log, "output training-log CSV path")->required();
  tr->add_option("--config", train_args.config_file, "key=value config file");
  tr->add_option("--set", train_args.overrides,
                 "config override key=value (repeatable, wins over --config)");
  std::vector<ConfigPatch> train_patches;
  train_patches.emplace_back(
      tr->add_option("--epochs", train_args.epochs, "training epochs (default 20)")->default_str(""),
      [&](ExperimentConfig& c) { c.epochs = train_args.epochs; });
  train_patches.emplace_back(
      tr->add_option("--anchors-per-epoch", train_args.anchors_per_epoch,
                     "anchor scenes per epoch (default 2000)")->default_str(""),
      [&](ExperimentConfig& c) { c.anchors_per_epoch = train_args.anchors_per_epoch; });
  train_patches.emplace_back(
      tr->add_option("--batch-size", train_args.batch_size, "anchors per batch (default 64)")->default_str(""),
      [&](ExperimentConfig& c) { c.batch_size = train_args.batch_size; });
  train_patches.emplace_back(
      tr->add_option("--lr", train_args.lr, "Adam learning rate (default 0.001)")->default_str(""),
      [&](ExperimentConfig& c) { c.lr = train_args.lr; });
  train_patches.emplace_back(
      tr->add_option("--temperature", train_args.temperature,
                     "contrastive temperature (default 0.2)")->default_str(""),
      [&](ExperimentConfig& c) { c.temperature = train_args.temperature; });
  train_patches.emplace_back(
      tr->add_option("--kp", train_args.kp, "synthetic positives per anchor (default 2)")->default_str(""),
      [&](ExperimentConfig& c) { c.k_p = train_args.kp; });
  train_patches.emplace_back(
      tr->add_option("--kn", train_args.kn, "synthetic negatives per anchor (default 2)")->default_str(""),
      [&](ExperimentConfig& c) { c.k_n = train_args.kn; });
  train_patches.emplace_back(
      tr->add_option("--seed", train_args.seed, "training seed (default 42)")->default_str(""),
      [&](ExperimentConfig& c) { c.seed = train_args.seed; });
  train_patches.emplace_back(
      tr->add_option("--max-vehicles", train_args.max_vehicles,
                     "max vehicles per anchor scene (default 2)")->default_str(""),
      [&](ExperimentConfig& c) { c.max_vehicles = train_args.max_vehicles; });
  train_patches.emplace_back(
      tr->add_flag("--frozen-data", train_args.frozen_data,
                   "reuse the dataset images instead of rendering fresh scenes"),
      [&](ExperimentConfig& c) { c.frozen_data = train_args.frozen_data; });
  train_patches.emplace_back(
      tr->add_flag("--record-timing", train_args.record_timing,
                   "record wall-clock seconds per epoch in the log"),
      [&](ExperimentConfig& c) { c.record_timing = train_args.record_timing; });

  ProbeArgs probe_args;
  CLI::App* pr = app.add_subcommand("probe", "linear-probe frozen representations");
  pr->add_option("--models", probe_args.models,
                 "three checkpoints in order: untrained simclr gameclr")
      ->expected(3)
      ->required();
  pr->add_option("--data", probe_args.data, "probe-mode dataset directory")->required();
  pr->add_option("--out", probe_args.out, "output report CSV path")->required();
  pr->add_option("--runs", probe_args.runs, "independent probe runs");
  pr->add_option("--lambda", probe_args.lambda, "ridge regularization strength");
  pr->add_option("--test-fraction", probe_args.test_fraction, "held-out fraction per run");
  pr->add_option("--seed", probe_args.seed, "probe split seed");
  pr->add_flag("--probe-embeddings", probe_args.probe_embeddings,
               "probe projected embeddings instead of representations");

  PlotArgs plot_args;
  CLI::App* pl = app.add_subcommand("plot", "render training-log curves as SVG");
  pl->add_option("--log", plot_args.log, "training-log CSV")->required();
  pl->add_option("--log2", plot_args.log2, "second log overlaid with dashed strokes");
  pl->add_option("--out", plot_args.out, "output SVG path")->required();

  ExperimentArgs exp_args;
  CLI::App* ex = app.add_subcommand("experiment", "run gen -> train x2 -> probe -> plot");
  ex->add_option("--config", exp_args.config_file, "key=value config file")->required();
  ex->add_option("--out", exp_args.out, "output artifact directory")->required();
  ex->add_option("--set", exp_args.overrides,
                 "config override key=value (repeatable, wins over --config)");

  int rc = 0;
  gen->callback([&] { rc = run_gen(gen_args); });
  tr->callback([&] { rc = run_train(train_args, train_patches); });
  pr->callback([&] { rc = run_probe_cmd(probe_args); });
  pl->callback([&] { rc = run_plot(plot_args); });
  ex->callback([&] { rc = run_experiment(exp_args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return rc;
}
