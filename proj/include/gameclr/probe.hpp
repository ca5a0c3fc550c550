#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "gameclr/dataio.hpp"
#include "gameclr/errors.hpp"
#include "gameclr/matrix.hpp"
#include "gameclr/model.hpp"
#include "gameclr/ridge.hpp"
#include "gameclr/scene.hpp"
#include "gameclr/stats.hpp"

namespace gameclr {

struct ProbeConfig {
  int runs = 5;
  double lambda = 1.0;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
  // Probe the projector output instead of the representation; off by default
  // (standard practice is to probe the pre-projection representation).
  bool probe_embeddings = false;
};

struct ProbeDataset {
  std::vector<Image> images;
  Matrix<double> targets;  // N x 6, traffic-variable order
};

inline ProbeDataset make_probe_dataset(const DatasetBundle& bundle) {
  ProbeDataset ds;
  ds.images = bundle.images;
  ds.targets = Matrix<double>(static_cast<int>(bundle.labels.size()), 6);
  for (std::size_t i = 0; i < bundle.labels.size(); ++i) {
    const auto arr = bundle.labels[i].as_array();
    for (int v = 0; v < 6; ++v) ds.targets.at(static_cast<int>(i), v) = arr[v];
  }
  return ds;
}

// Frozen-encoder features for probing, as doubles for the ridge solve.
inline Matrix<double> extract_representations(const Model<float>& model,
                                              const std::vector<Image>& images,
                                              bool use_embeddings = false) {
  Matrix<float> reps = model.encode(images);
  if (use_embeddings) reps = model.project(reps);
  Matrix<double> out(reps.rows, reps.cols);
  for (std::size_t i = 0; i < reps.data.size(); ++i) out.data[i] = reps.data[i];
  return out;
}

inline constexpr const char* kProbeModelNames[3] = {"untrained", "simclr", "gameclr"};

struct ProbeCell {
  std::vector<double> r2_runs;
  MeanCi agg;
};

struct ProbeReport {
  std::vector<std::string> variables;
  std::vector<std::string> models;
  std::vector<std::vector<ProbeCell>> cells;          // [variable][model]
  std::vector<std::optional<double>> p_vs_simclr;     // per variable, gameclr vs simclr
  int runs = 0;
};

// Mean of the per-variable mean R^2 for one model column.
inline double report_model_mean(const ProbeReport& report, int model_idx) {
  double s = 0.0;
  for (const auto& row : report.cells) s += row[static_cast<std::size_t>(model_idx)].agg.mean;
  return s / static_cast<double>(report.cells.size());
}

namespace detail {

inline constexpr std::uint64_t kSplitSalt = 0x5f17;
inline constexpr std::uint64_t kUntrainedSalt = 0x0417;

struct Split {
  std::vector<int> train, test;
};

inline Split make_split(int n, double test_fraction, std::uint64_t seed) {
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_int(i + 1)]);
  const int test_n = static_cast<int>(std::lround(n * test_fraction));
  Split s;
  s.test.assign(perm.begin(), perm.begin() + test_n);
  s.train.assign(perm.begin() + test_n, perm.end());
  return s;
}

inline Matrix<double> gather_rows(const Matrix<double>& m, const std::vector<int>& rows) {
  Matrix<double> out(static_cast<int>(rows.size()), m.cols);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int c = 0; c < m.cols; ++c) out.at(static_cast<int>(i), c) = m.at(rows[i], c);
  return out;
}

}  // namespace detail

// Linear probing protocol: per run, a fresh 80/20 split of the probe data and
// a freshly initialized untrained baseline; the trained encoders stay frozen.
// Per (run, model, variable): ridge on the train split, R^2 on the test
// split. Aggregates use a Student-t 95% CI and Welch p-values against SimCLR.
inline ProbeReport run_probe(const Model<float>& untrained, const Model<float>& simclr,
                             const Model<float>& gameclr, const ProbeDataset& ds,
                             const ProbeConfig& cfg) {
  const int n = static_cast<int>(ds.images.size());
  if (n < 100) throw ConfigError("probe dataset needs at least 100 rows");
  if (ds.targets.rows != n) throw ShapeMismatch("probe targets row count");
  if (cfg.runs < 1) throw ConfigError("runs must be >= 1");
  if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0))
    throw ConfigError("test_fraction must be in (0,1)");
  if (!(untrained.spec() == simclr.spec()) || !(simclr.spec() == gameclr.spec()))
    throw ShapeMismatch("probe checkpoints disagree on architecture");

  ProbeReport report;
  report.runs = cfg.runs;
  for (const char* v : kTrafficVariableNames) report.variables.emplace_back(v);
  for (const char* m : kProbeModelNames) report.models.emplace_back(m);
  report.cells.assign(report.variables.size(),
                      std::vector<ProbeCell>(report.models.size()));
  report.p_vs_simclr.assign(report.variables.size(), std::nullopt);

  const Matrix<double> reps_simclr =
      extract_representations(simclr, ds.images, cfg.probe_embeddings);
  const Matrix<double> reps_gameclr =
      extract_representations(gameclr, ds.images, cfg.probe_embeddings);

  for (int run = 0; run < cfg.runs; ++run) {
    const auto split = detail::make_split(
        n, cfg.test_fraction,
        fold_seed(cfg.seed, detail::kSplitSalt + static_cast<std::uint64_t>(run)));

    Model<float> fresh(untrained.spec());
    fresh.init(fold_seed(cfg.seed, detail::kUntrainedSalt + static_cast<std::uint64_t>(run)));
    const Matrix<double> reps_untrained =
        extract_representations(fresh, ds.images, cfg.probe_embeddings);

    const Matrix<double>* reps[3] = {&reps_untrained, &reps_simclr, &reps_gameclr};
    for (int m = 0; m < 3; ++m) {
      const Matrix<double> xtrain = detail::gather_rows(*reps[m], split.train);
      const Matrix<double> xtest = detail::gather_rows(*reps[m], split.test);
      RidgeSolver solver(xtrain, cfg.lambda);
      for (std::size_t v = 0; v < report.variables.size(); ++v) {
        std::vector<double> ytrain(split.train.size()), ytest(split.test.size());
        for (std::size_t i = 0; i < split.train.size(); ++i)
          ytrain[i] = ds.targets.at(split.train[i], static_cast<int>(v));
        for (std::size_t i = 0; i < split.test.size(); ++i)
          ytest[i] = ds.targets.at(split.test[i], static_cast<int>(v));
        const RidgeFit fit = solver.solve(ytrain);
        std::vector<double> pred(split.test.size());
        for (std::size_t i = 0; i < split.test.size(); ++i)
          pred[i] = solver.predict(fit, xtest.row(static_cast<int>(i)));
        report.cells[v][static_cast<std::size_t>(m)].r2_runs.push_back(r_squared(ytest, pred));
      }
    }
  }

  for (std::size_t v = 0; v < report.variables.size(); ++v) {
    for (auto& cell : report.cells[v]) cell.agg = mean_ci95(cell.r2_runs);
    if (cfg.runs >= 2)
      report.p_vs_simclr[v] = welch_p_value(report.cells[v][2].r2_runs,
                                            report.cells[v][1].r2_runs);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Report files: long-form CSV, aggregate CSV, and a text grid with an
// asterisk on each row's best mean. For out path `report.csv` the files are
// report.csv, report_summary.csv and report_table.txt.
// ---------------------------------------------------------------------------
inline std::filesystem::path report_summary_path(const std::filesystem::path& out) {
  std::filesystem::path p = out;
  p.replace_filename(out.stem().string() + "_summary.csv");
  return p;
}

inline std::filesystem::path report_table_path(const std::filesystem::path& out) {
  std::filesystem::path p = out;
  p.replace_filename(out.stem().string() + "_table.txt");
  return p;
}

inline void render_report(const ProbeReport& report, const std::filesystem::path& out_path) {
  std::string longform = "variable,model,run,r2\n";
  for (std::size_t v = 0; v < report.variables.size(); ++v)
    for (std::size_t m = 0; m < report.models.size(); ++m)
      for (std::size_t r = 0; r < report.cells[v][m].r2_runs.size(); ++r) {
        longform += report.variables[v];
        longform += ',';
        longform += report.models[m];
        longform += ',';
        longform += std::to_string(r);
        longform += ',';
        longform += detail::format_double(report.cells[v][m].r2_runs[r], 9);
        longform += '\n';
      }
  if (out_path.has_parent_path()) detail::ensure_dir(out_path.parent_path());
  detail::write_file(out_path, longform);

  std::string agg = "variable,model,mean,ci95,p_vs_simclr\n";
  for (std::size_t v = 0; v < report.variables.size(); ++v)
    for (std::size_t m = 0; m < report.models.size(); ++m) {
      agg += report.variables[v];
      agg += ',';
      agg += report.models[m];
      agg += ',';
      agg += detail::format_double(report.cells[v][m].agg.mean, 9);
      agg += ',';
      agg += detail::format_double(report.cells[v][m].agg.half_width, 9);
      agg += ',';
      if (report.models[m] == "gameclr" && report.p_vs_simclr[v].has_value())
        agg += detail::format_double(*report.p_vs_simclr[v], 9);
      agg += '\n';
    }
  detail::write_file(report_summary_path(out_path), agg);

  std::string table;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%-12s", "variable");
  table += buf;
  for (const auto& m : report.models) {
    std::snprintf(buf, sizeof(buf), "  %-18s", m.c_str());
    table += buf;
  }
  table += '\n';
  for (std::size_t v = 0; v < report.variables.size(); ++v) {
    std::snprintf(buf, sizeof(buf), "%-12s", report.variables[v].c_str());
    table += buf;
    std::size_t best = 0;
    for (std::size_t m = 1; m < report.models.size(); ++m)
      if (report.cells[v][m].agg.mean > report.cells[v][best].agg.mean) best = m;
    for (std::size_t m = 0; m < report.models.size(); ++m) {
      const auto& a = report.cells[v][m].agg;
      std::string cell;
      std::snprintf(buf, sizeof(buf), "%.3f ± %.3f", a.mean, a.half_width);
      cell = buf;
      if (m == best) cell += '*';
      std::snprintf(buf, sizeof(buf), "  %-18s", cell.c_str());
      table += buf;
    }
    table += '\n';
  }
  if (report.runs == 1)
    table += "warning: single run; confidence intervals are 0 placeholders\n";
  detail::write_file(report_table_path(out_path), table);
}

// Rebuilds a report from the long-form and aggregate CSVs (for round-trip
// checks and plotting-free consumers).
inline ProbeReport read_report(const std::filesystem::path& out_path) {
  ProbeReport report;
  const auto long_lines = detail::split_lines(detail::read_file(out_path));
  if (long_lines.empty() || long_lines[0] != "variable,model,run,r2")
    throw IoError(out_path.string() + ": long-form header mismatch");
  const auto model_index = [](const std::string& m) {
    for (int i = 0; i < 3; ++i)
      if (m == kProbeModelNames[i]) return i;
    throw IoError("unknown model '" + m + "' in report");
  };
  const auto variable_index = [&report](const std::string& v) {
    for (std::size_t i = 0; i < report.variables.size(); ++i)
      if (report.variables[i] == v) return static_cast<int>(i);
    report.variables.push_back(v);
    report.cells.emplace_back(3);
    report.p_vs_simclr.emplace_back();
    return static_cast<int>(report.variables.size()) - 1;
  };
  for (const char* m : kProbeModelNames) report.models.emplace_back(m);
  for (std::size_t i = 1; i < long_lines.size(); ++i) {
    const auto f = detail::split_csv_line(long_lines[i]);
    if (f.size() != 4) throw IoError("long-form row needs 4 fields");
    const int v = variable_index(f[0]);
    const int m = model_index(f[1]);
    report.cells[static_cast<std::size_t>(v)][static_cast<std::size_t>(m)].r2_runs.push_back(
        detail::parse_double(f[3], "report"));
  }
  for (auto& row : report.cells) {
    for (auto& cell : row) report.runs = std::max(report.runs, static_cast<int>(cell.r2_runs.size()));
  }

  const auto agg_lines = detail::split_lines(detail::read_file(report_summary_path(out_path)));
  if (agg_lines.empty() || agg_lines[0] != "variable,model,mean,ci95,p_vs_simclr")
    throw IoError("aggregate header mismatch");
  for (std::size_t i = 1; i < agg_lines.size(); ++i) {
    const auto f = detail::split_csv_line(agg_lines[i]);
    if (f.size() != 5) throw IoError("aggregate row needs 5 fields");
    const int v = variable_index(f[0]);
    const int m = model_index(f[1]);
    auto& cell = report.cells[static_cast<std::size_t>(v)][static_cast<std::size_t>(m)];
    cell.agg.mean = detail::parse_double(f[2], "report summary");
    cell.agg.half_width = detail::parse_double(f[3], "report summary");
    if (!f[4].empty())
      report.p_vs_simclr[static_cast<std::size_t>(v)] =
          detail::parse_double(f[4], "report summary");
  }
  return report;
}

}  // namespace gameclr
