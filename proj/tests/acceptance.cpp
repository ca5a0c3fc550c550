// Acceptance gate for the whole laboratory. Each numbered criterion prints
// one PASS/FAIL line with its measured evidence; the process exits nonzero
// if any line fails. Heavyweight artifacts (the trained checkpoints) are
// shared between criteria 5 and 6, so the binary runs the full training
// pipeline exactly once per seed.

#include <sys/resource.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

#include "gameclr/batches.hpp"
#include "gameclr/config.hpp"
#include "gameclr/contrastive.hpp"
#include "gameclr/dataio.hpp"
#include "gameclr/probe.hpp"
#include "gameclr/render.hpp"
#include "gameclr/ridge.hpp"
#include "gameclr/scene.hpp"
#include "gameclr/training.hpp"
#include "oracles.hpp"

using namespace gameclr;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double peak_rss_mb() {
  rusage ru{};
  getrusage(RUSAGE_SELF, &ru);
  return static_cast<double>(ru.ru_maxrss) / 1024.0;  // ru_maxrss is KiB on Linux
}

int failures = 0;

void report(int criterion, bool ok, const std::string& detail) {
  std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", criterion, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// -------------------------------------------------------------------------
// 1. gradient fidelity
// -------------------------------------------------------------------------
void criterion_1() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (int i = 0; i < 100; ++i)
    worst = std::max(worst, gradient_check(toy_arch_spec(), fold_seed(0xacc1, i)));
  const double secs = seconds_since(t0);
  report(1, worst < 1e-4 && secs < 120.0,
         "gradient check x100, max relative error " + fmt(worst) + " (limit 1e-4), " + fmt(secs) +
             "s (limit 120s)");
}

// -------------------------------------------------------------------------
// 2. per-pair probability vs dense softmax oracle
// -------------------------------------------------------------------------
void criterion_2() {
  Rng rng(0xacc2);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const int d = 1 + rng.uniform_int(8);
    const int nn = rng.uniform_int(7);
    const double tau = rng.uniform(0.05, 5.0);
    const auto a = oracles::random_unit_vec(rng, d);
    const auto p = oracles::random_unit_vec(rng, d);
    std::vector<std::vector<double>> negs;
    for (int k = 0; k < nn; ++k) negs.push_back(oracles::random_unit_vec(rng, d));
    const double got = contrastive_probability(a, p, negs, tau);
    worst = std::max(worst, std::abs(got - oracles::probability(a, p, negs, tau)));
  }

  const std::vector<double> ex = {1.0, 0.0};
  const bool empty_ok = contrastive_probability(ex, ex, {}, 0.2) == 1.0;
  const bool symmetric_ok =
      std::abs(contrastive_probability(ex, {0.6, 0.8}, {{0.6, 0.8}}, 0.7) - 0.5) < 1e-15;
  const double skewed =
      contrastive_probability(ex, ex, {{0.4, std::sqrt(1.0 - 0.16)}}, 0.2);
  const bool skewed_ok = std::abs(skewed - 0.9525741268224334) < 1e-9;

  report(2, worst < 1e-9 && empty_ok && symmetric_ok && skewed_ok,
         "probability vs oracle x1000, max diff " + fmt(worst) +
             " (limit 1e-9); tagged examples " +
             (empty_ok && symmetric_ok && skewed_ok ? "exact" : "WRONG"));
}

// -------------------------------------------------------------------------
// 3. batch losses vs brute-force similarity-matrix recomputation
// -------------------------------------------------------------------------
BatchLossTerms simclr_terms(int b) {
  BatchLossTerms t;
  for (int i = 0; i < 2 * b; ++i) {
    AnchorTerms a;
    a.anchor = i;
    a.positives = {i ^ 1};
    for (int j = 0; j < 2 * b; ++j)
      if (j != i && j != (i ^ 1)) a.negatives.push_back(j);
    t.anchors.push_back(a);
  }
  t.normalizer = 2.0 * b;
  return t;
}

BatchLossTerms gameclr_terms(int b, int kp, int kn) {
  const int g = 1 + kp + kn;
  BatchLossTerms t;
  for (int i = 0; i < b; ++i) {
    AnchorTerms a;
    a.anchor = i * g;
    for (int j = 0; j < kp; ++j) a.positives.push_back(i * g + 1 + j);
    for (int j = 0; j < kn; ++j) a.negatives.push_back(i * g + 1 + kp + j);
    for (int o = 0; o < b; ++o)
      if (o != i)
        for (int j = 0; j < g; ++j) a.negatives.push_back(o * g + j);
    t.anchors.push_back(a);
  }
  t.normalizer = b;
  return t;
}

void criterion_3() {
  Rng rng(0xacc3);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const bool game = (i % 2) == 1;
    const int b = 2 + rng.uniform_int(5);
    const int d = 3 + rng.uniform_int(6);
    BatchLossTerms terms;
    int rows = 0;
    if (game) {
      const int kp = 1 + rng.uniform_int(2);
      const int kn = 1 + rng.uniform_int(2);
      terms = gameclr_terms(b, kp, kn);
      rows = b * (1 + kp + kn);
    } else {
      terms = simclr_terms(b);
      rows = 2 * b;
    }
    const double tau = rng.uniform(0.1, 1.0);
    Matrix<double> emb(rows, d);
    for (int r = 0; r < rows; ++r) {
      const auto v = oracles::random_unit_vec(rng, d);
      for (int c = 0; c < d; ++c) emb.at(r, c) = v[c];
    }
    const double got = batch_loss_and_grad(emb, terms, tau);
    worst = std::max(worst, std::abs(got - oracles::batch_loss(emb, terms, tau)));
  }
  report(3, worst < 1e-6,
         "batch loss vs brute force x100 (both methods), max diff " + fmt(worst) +
             " (limit 1e-6)");
}

// -------------------------------------------------------------------------
// 4. engine contracts
// -------------------------------------------------------------------------
void criterion_4() {
  const auto t0 = Clock::now();
  const auto& mask = road_region_mask();
  bool preserved = true, altered = true, deterministic = true, masked = true;
  for (int i = 0; i < 1000; ++i) {
    const std::uint64_t s0 = fold_seed(0xacc4, i);
    const SceneState s = sample_scene(s0, 2);

    const SceneState sp = scene_preserving_augment(s, fold_seed(s0, 1));
    if (traffic_variables(sp).as_array() != traffic_variables(s).as_array()) preserved = false;

    const SceneState sa = scene_altering_augment(s, fold_seed(s0, 2));
    if (vehicle_count(sa) <= vehicle_count(s)) altered = false;
    if (traffic_variables(sa).as_array() == traffic_variables(s).as_array()) altered = false;

    const Image r1 = render(s);
    if (!images_identical(r1, render(s))) deterministic = false;

    SceneState traffic_only = sa;  // same nuisance, different traffic
    traffic_only.ego_color = s.ego_color;
    traffic_only.weather = s.weather;
    traffic_only.time_of_day = s.time_of_day;
    const Image r2 = render(traffic_only);
    for (int y = 0; y < kImageSize && masked; ++y)
      for (int x = 0; x < kImageSize; ++x) {
        bool differs = false;
        for (int c = 0; c < kImageChannels; ++c)
          if (r1.at(y, x, c) != r2.at(y, x, c)) differs = true;
        if (differs && mask[static_cast<std::size_t>(y) * kImageSize + x] == 0) {
          masked = false;
          break;
        }
      }
  }
  const double secs = seconds_since(t0);
  const bool ok = preserved && altered && deterministic && masked && secs < 60.0;
  report(4, ok,
         std::string("engine contracts x1000: preserve ") + (preserved ? "ok" : "VIOLATED") +
             ", alter " + (altered ? "ok" : "VIOLATED") + ", render determinism " +
             (deterministic ? "ok" : "VIOLATED") + ", mask " + (masked ? "ok" : "VIOLATED") +
             ", " + fmt(secs) + "s (limit 60s)");
}

// -------------------------------------------------------------------------
// 5 + 6. training-curve shape and probe ordering (shared training runs)
// -------------------------------------------------------------------------
struct ShapeResult {
  bool ok = false;
  std::string detail;
};

ShapeResult curve_shape(const std::vector<TrainLogRecord>& log) {
  ShapeResult r;
  if (log.size() < 20) {
    r.detail = "log too short";
    return r;
  }
  const double e1_gap = std::abs(log[0].cos_pos - log[0].cos_neg_reg);
  const double final_sep = log.back().cos_pos - log.back().cos_neg_reg;
  double mid_sum = 0.0;
  int mid_n = 0;
  for (const TrainLogRecord& rec : log)
    if (rec.epoch >= 2 && rec.epoch <= 10 && rec.cos_neg_syn.has_value()) {
      mid_sum += *rec.cos_neg_syn - rec.cos_neg_reg;
      ++mid_n;
    }
  const double mid_mean = mid_n > 0 ? mid_sum / mid_n : 0.0;
  const double final_syn_gap =
      log.back().cos_neg_syn.has_value() ? *log.back().cos_neg_syn - log.back().cos_neg_reg : 1e9;
  const bool c1 = e1_gap < 0.05;
  const bool c2 = final_sep > 0.2;
  const bool c3 = mid_n > 0 && mid_mean > 0.0;
  const bool c4 = final_syn_gap < mid_mean;
  r.ok = c1 && c2 && c3 && c4;
  r.detail = "e1 gap " + fmt(e1_gap) + (c1 ? "" : "(!)") + ", final sep " + fmt(final_sep) +
             (c2 ? "" : "(!)") + ", mid syn-reg mean " + fmt(mid_mean) + (c3 ? "" : "(!)") +
             ", final syn-reg " + fmt(final_syn_gap) + (c4 ? "" : "(!)");
  return r;
}

void criteria_5_and_6() {
  ExperimentConfig base;  // the default desk configuration
  base.record_timing = false;

  const auto trained = [&](Method m, std::uint64_t seed) {
    TrainConfig tc = base.to_train_config(m);
    tc.seed = seed;
    require_valid_train_config(tc);
    std::printf("  training %s seed %llu (%d epochs x %d anchors)...\n", method_name(m),
                static_cast<unsigned long long>(seed), tc.epochs, tc.anchors_per_epoch);
    std::fflush(stdout);
    return train(tc, nullptr, [](const TrainLogRecord& rec) {
      if (rec.epoch % 5 == 0 || rec.epoch == 1)
        std::printf("    epoch %d  cos_pos %.3f  cos_neg_reg %.3f\n", rec.epoch, rec.cos_pos,
                    rec.cos_neg_reg);
      std::fflush(stdout);
    });
  };

  // --- criterion 5: curve shape on three seeds, at least two must pass ---
  std::vector<TrainResult> game_runs;
  int shape_passes = 0;
  std::string shape_detail;
  const std::uint64_t seeds[3] = {42, 43, 44};
  for (int i = 0; i < 3; ++i) {
    game_runs.push_back(trained(Method::gameclr, seeds[i]));
    const ShapeResult sr = curve_shape(game_runs.back().log);
    if (sr.ok) ++shape_passes;
    shape_detail += (i > 0 ? "; " : "") + std::string("seed ") + std::to_string(seeds[i]) + " " +
                    (sr.ok ? "ok" : "FAIL") + " [" + sr.detail + "]";
  }
  report(5, shape_passes >= 2,
         "curve shape on " + std::to_string(shape_passes) + "/3 seeds (need 2): " + shape_detail);

  // --- criterion 6: probe ordering against the seed-42 checkpoints ---
  const TrainResult sim42 = trained(Method::simclr, 42);
  const TrainResult& game42 = game_runs.front();

  std::printf("  rendering probe dataset and probing (5 runs)...\n");
  std::fflush(stdout);
  DatasetBundle bundle;
  for (int i = 0; i < 1000; ++i) {
    const SceneState s = sample_scene(fold_seed(0xacc6, i), kNumLanes);
    bundle.images.push_back(render(s));
    bundle.labels.push_back(traffic_variables(s));
  }
  const ProbeDataset ds = make_probe_dataset(bundle);

  Model<float> untrained;
  untrained.init(fold_seed(42, detail::kInitSalt));

  ProbeConfig pc;
  pc.runs = 5;
  pc.seed = 42;
  const ProbeReport rep = run_probe(untrained, sim42.model, game42.model, ds, pc);

  const double mean_u = report_model_mean(rep, 0);
  const double mean_s = report_model_mean(rep, 1);
  const double mean_g = report_model_mean(rep, 2);
  const bool ordering = mean_g > mean_s && mean_s > mean_u;

  int game_wins = 0;
  std::size_t largest_gap_var = 0;
  double largest_gap = -1e9;
  for (std::size_t v = 0; v < rep.variables.size(); ++v) {
    const double gap = rep.cells[v][2].agg.mean - rep.cells[v][1].agg.mean;
    if (gap > 0.0) ++game_wins;
    if (gap > largest_gap) {
      largest_gap = gap;
      largest_gap_var = v;
    }
  }
  const double rel_gain = (mean_g - mean_s) / std::abs(mean_s);
  const std::optional<double> p = rep.p_vs_simclr[largest_gap_var];
  const bool p_ok = p.has_value() && *p < 0.05;

  const bool ok = ordering && game_wins >= 5 && rel_gain >= 0.03 && p_ok;
  report(6, ok,
         "mean R2 untrained/simclr/gameclr " + fmt(mean_u) + "/" + fmt(mean_s) + "/" +
             fmt(mean_g) + (ordering ? "" : " ORDER VIOLATED") + "; gameclr wins " +
             std::to_string(game_wins) + "/6 variables (need 5); relative gain " +
             fmt(100.0 * rel_gain) + "% (need 3%); largest gap at " +
             rep.variables[largest_gap_var] + " p=" + (p.has_value() ? fmt(*p) : "n/a") +
             " (need <0.05)");
}

// -------------------------------------------------------------------------
// 7. ridge closed form vs iterative minimizer
// -------------------------------------------------------------------------
void criterion_7() {
  Rng rng(0xacc7);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 25 + rng.uniform_int(40);
    const int d = 2 + rng.uniform_int(10);
    const double lambda = std::pow(10.0, rng.uniform(-1.0, 1.0));
    Matrix<double> x(n, d);
    for (double& v : x.data) v = rng.uniform(-2.0, 2.0);
    std::vector<double> y(n);
    for (int i = 0; i < n; ++i) {
      y[i] = rng.normal(0.0, 0.3);
      for (int j = 0; j < d; ++j) y[i] += (j + 1) * 0.3 * x.at(i, j);
    }
    const RidgeFit fast = fit_ridge(x, y, lambda);
    const oracles::RidgeFit slow = oracles::ridge_cg(x, y, lambda);
    for (int j = 0; j < d; ++j)
      worst = std::max(worst, std::abs(fast.weights[j] - slow.weights[j]));
    worst = std::max(worst, std::abs(fast.intercept - slow.intercept));
  }
  const bool hand = r_squared({1.0, 2.0, 3.0}, {1.0, 2.0, 4.0}) == 0.5;
  report(7, worst < 1e-6 && hand,
         "ridge closed form vs iterative x20, max coefficient diff " + fmt(worst) +
             " (limit 1e-6); r_squared hand example " + (hand ? "exact" : "WRONG"));
}

// -------------------------------------------------------------------------
// 8. end-to-end determinism of the experiment pipeline
// -------------------------------------------------------------------------
void criterion_8() {
  oracles::TempDir tmp;
  gameclr::detail::write_file(tmp / "cfg",
                              "epochs = 1\n"
                              "anchors_per_epoch = 8\n"
                              "batch_size = 4\n"
                              "train_data_anchors = 4\n"
                              "probe_anchors = 100\n"
                              "runs = 1\n"
                              "seed = 2026\n");
  const std::string base = std::string(GCLR_CLI_PATH) + " experiment --config " +
                           (tmp / "cfg").string() + " --out ";
  const std::string log = " >> " + (tmp / "cli.log").string() + " 2>&1";
  const int rc1 = std::system((base + (tmp / "r1").string() + log).c_str());
  const int rc2 = std::system((base + (tmp / "r2").string() + log).c_str());
  if (rc1 != 0 || rc2 != 0) {
    report(8, false, "experiment command failed (exit " + std::to_string(rc1) + "/" +
                         std::to_string(rc2) + ")");
    return;
  }
  const std::string m1 = gameclr::detail::read_file(tmp / "r1" / "manifest.txt");
  const std::string m2 = gameclr::detail::read_file(tmp / "r2" / "manifest.txt");
  report(8, !m1.empty() && m1 == m2,
         "experiment run twice: manifests " +
             std::string(m1 == m2 ? "identical" : "DIFFER") + " (" +
             std::to_string(gameclr::detail::split_lines(m1).size()) + " hashed artifacts)");
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  std::printf("acceptance gate: 9 criteria\n");

  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_7();
  criterion_8();
  criteria_5_and_6();

  const double total_min = seconds_since(t0) / 60.0;
  const double rss = peak_rss_mb();
  report(9, total_min < 45.0 && rss < 2048.0,
         "total " + fmt(total_min) + " min (limit 45), peak rss " + fmt(rss) +
             " MB (limit 2048)");

  if (failures == 0) {
    std::printf("all criteria passed\n");
    return 0;
  }
  std::printf("%d criteria FAILED\n", failures);
  return 1;
}
