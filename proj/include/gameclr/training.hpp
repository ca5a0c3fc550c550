#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "gameclr/batches.hpp"
#include "gameclr/contrastive.hpp"
#include "gameclr/dataio.hpp"
#include "gameclr/errors.hpp"
#include "gameclr/model.hpp"
#include "gameclr/render.hpp"
#include "gameclr/scene.hpp"

namespace gameclr {

enum class Method { simclr, gameclr };

inline const char* method_name(Method m) { return m == Method::simclr ? "simclr" : "gameclr"; }

inline Method parse_method(const std::string& s) {
  if (s == "simclr") return Method::simclr;
  if (s == "gameclr") return Method::gameclr;
  throw ConfigError("unknown method '" + s + "' (expected simclr or gameclr)");
}

struct TrainConfig {
  Method method = Method::gameclr;
  int epochs = 20;
  int anchors_per_epoch = 2000;
  double lr = 1e-3;
  LossConfig loss;
  AugmentPolicy policy;
  std::uint64_t seed = 0;
  // Anchor scenes keep at least one lane empty so the scene-altering augment
  // always has room; hence the cap below the lane count.
  int max_vehicles = 2;
  bool frozen_data = false;
  // Wall-clock seconds per epoch; off gives byte-identical logs across runs.
  bool record_timing = true;
};

struct TrainLogRecord {
  int epoch = 0;
  double loss = 0.0;
  double cos_pos = 0.0;
  double cos_neg_reg = 0.0;
  std::optional<double> cos_neg_syn;
  double seconds = 0.0;
};

struct TrainResult {
  Model<float> model;
  std::vector<TrainLogRecord> log;
  long degenerate_embeddings = 0;
};

inline double cosine_similarity(const std::vector<double>& u, const std::vector<double>& v) {
  if (u.size() != v.size()) throw ShapeMismatch("cosine of different dims");
  double uu = 0.0, vv = 0.0, uv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    uu += u[i] * u[i];
    vv += v[i] * v[i];
    uv += u[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) throw ZeroVector();
  return std::clamp(uv / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

inline void require_valid_train_config(const TrainConfig& c) {
  if (c.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (c.anchors_per_epoch < c.loss.batch_size)
    throw ConfigError("anchors_per_epoch must be >= batch_size");
  if (!(c.lr >= 0.0)) throw ConfigError("lr must be >= 0");
  if (c.max_vehicles < 0 || c.max_vehicles >= kNumLanes)
    throw ConfigError("max_vehicles must leave an empty lane");
  require_valid_loss_config(c.loss, c.method == Method::gameclr);
  require_valid_policy(c.policy);
}

namespace detail {

inline constexpr std::uint64_t kInitSalt = 0x1417;
inline constexpr std::uint64_t kEpochSalt = 0x5e5a;
inline constexpr std::uint64_t kBatchSalt = 0xba7c;
inline constexpr std::uint64_t kShuffleSalt = 0x54f1;

// Frozen-data view reconstructed from a bundle's group manifest.
struct FrozenData {
  std::vector<Image> anchors;                 // simclr
  std::vector<std::vector<Image>> groups;     // gameclr: [anchor, pos..., neg...]
};

inline FrozenData prepare_frozen(const DatasetBundle& bundle, const TrainConfig& cfg) {
  FrozenData out;
  if (cfg.method == Method::simclr) {
    for (const GroupEntry& g : bundle.groups)
      if (g.role == Role::anchor) out.anchors.push_back(bundle.images[g.image_index]);
    if (out.anchors.empty())
      throw DatasetMethodMismatch("dataset has no anchor images");
    if (static_cast<int>(out.anchors.size()) < cfg.loss.batch_size)
      throw DatasetMethodMismatch("dataset smaller than one batch");
    return out;
  }
  validate_bundle(bundle, true);
  int max_anchor = -1;
  for (const GroupEntry& g : bundle.groups) max_anchor = std::max(max_anchor, g.anchor_id);
  std::vector<std::vector<int>> anchor_rows(max_anchor + 1), pos_rows(max_anchor + 1),
      neg_rows(max_anchor + 1);
  for (const GroupEntry& g : bundle.groups) {
    if (g.role == Role::anchor) anchor_rows[g.anchor_id].push_back(g.image_index);
    if (g.role == Role::syn_pos) pos_rows[g.anchor_id].push_back(g.image_index);
    if (g.role == Role::syn_neg) neg_rows[g.anchor_id].push_back(g.image_index);
  }
  for (int a = 0; a <= max_anchor; ++a) {
    if (anchor_rows[a].size() != 1)
      throw DatasetMethodMismatch("anchor group " + std::to_string(a) +
                                  " must have exactly one anchor image");
    if (static_cast<int>(pos_rows[a].size()) < cfg.loss.k_p ||
        static_cast<int>(neg_rows[a].size()) < cfg.loss.k_n)
      throw DatasetMethodMismatch("anchor group " + std::to_string(a) +
                                  " has fewer synthetic views than k_p/k_n");
    std::vector<Image> group;
    group.push_back(bundle.images[anchor_rows[a][0]]);
    for (int j = 0; j < cfg.loss.k_p; ++j) group.push_back(bundle.images[pos_rows[a][j]]);
    for (int j = 0; j < cfg.loss.k_n; ++j) group.push_back(bundle.images[neg_rows[a][j]]);
    out.groups.push_back(std::move(group));
  }
  if (static_cast<int>(out.groups.size()) < cfg.loss.batch_size)
    throw DatasetMethodMismatch("dataset smaller than one batch");
  return out;
}

// Seeded permutation of [0, n), repeated until `want` indices are available.
inline std::vector<int> epoch_order(int n, int want, std::uint64_t seed) {
  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(want));
  Rng rng(seed);
  std::vector<int> perm(static_cast<std::size_t>(n));
  while (static_cast<int>(order.size()) < want) {
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_int(i + 1)]);
    for (int v : perm) {
      if (static_cast<int>(order.size()) == want) break;
      order.push_back(v);
    }
  }
  return order;
}

}  // namespace detail

// Runs the contrastive training loop for either method. Deterministic in
// (config, dataset); the loss/gradient math runs in doubles on top of float
// embeddings. `bundle` is only consulted when cfg.frozen_data is set;
// otherwise anchor scenes are sampled fresh from the seed stream each epoch.
// `on_epoch` fires after each epoch record is finalized (progress reporting).
inline TrainResult train(const TrainConfig& cfg, const DatasetBundle* bundle = nullptr,
                         const std::function<void(const TrainLogRecord&)>& on_epoch = {}) {
  require_valid_train_config(cfg);
  if (cfg.frozen_data && bundle == nullptr)
    throw DatasetMethodMismatch("frozen-data training needs a dataset");

  TrainResult out;
  out.model = Model<float>();
  out.model.init(fold_seed(cfg.seed, detail::kInitSalt));
  if (cfg.epochs == 0) return out;

  detail::FrozenData frozen;
  if (cfg.frozen_data) frozen = detail::prepare_frozen(*bundle, cfg);

  const int B = cfg.loss.batch_size;
  const int steps = cfg.anchors_per_epoch / B;
  AdamState<float> adam;
  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;
  ForwardCache<float> cache;
  Params<float> grads;
  grads.allocate(out.model.spec());

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t epoch_seed =
        fold_seed(fold_seed(cfg.seed, detail::kEpochSalt), static_cast<std::uint64_t>(epoch));
    std::vector<int> order;
    if (cfg.frozen_data) {
      const int n = cfg.method == Method::simclr ? static_cast<int>(frozen.anchors.size())
                                                 : static_cast<int>(frozen.groups.size());
      order = detail::epoch_order(n, steps * B, fold_seed(epoch_seed, detail::kShuffleSalt));
    }

    double loss_sum = 0.0;
    DiagnosticSums diag;
    for (int step = 0; step < steps; ++step) {
      const std::uint64_t batch_seed =
          fold_seed(fold_seed(epoch_seed, detail::kBatchSalt), static_cast<std::uint64_t>(step));
      ContrastiveBatch batch;
      if (cfg.method == Method::simclr) {
        std::vector<Image> anchors(static_cast<std::size_t>(B));
        if (cfg.frozen_data) {
          for (int j = 0; j < B; ++j) anchors[j] = frozen.anchors[order[step * B + j]];
        } else {
          parallel_for(B, [&](int j) {
            anchors[j] = render(
                sample_scene(fold_seed(epoch_seed, static_cast<std::uint64_t>(step) * 1000 + j),
                             cfg.max_vehicles));
          });
        }
        batch = build_simclr_batch(anchors, cfg.policy, batch_seed, out.model, &cache,
                                   &out.degenerate_embeddings);
      } else if (cfg.frozen_data) {
        std::vector<std::vector<Image>> groups(static_cast<std::size_t>(B));
        for (int j = 0; j < B; ++j) groups[j] = frozen.groups[order[step * B + j]];
        batch = build_gameclr_batch_frozen(groups, cfg.loss, cfg.policy, batch_seed, out.model,
                                           &cache, &out.degenerate_embeddings);
      } else {
        std::vector<SceneState> scenes(static_cast<std::size_t>(B));
        for (int j = 0; j < B; ++j)
          scenes[j] = sample_scene(
              fold_seed(epoch_seed, static_cast<std::uint64_t>(step) * 1000 + j),
              cfg.max_vehicles);
        batch = build_gameclr_batch(scenes, cfg.loss, cfg.policy, batch_seed, out.model, &cache,
                                    &out.degenerate_embeddings);
      }

      Matrix<double> demb;
      const double loss =
          batch_loss_and_grad(batch.embeddings, batch.terms, cfg.loss.temperature, &demb);
      if (!std::isfinite(loss)) throw NonFiniteLoss(epoch, step);
      loss_sum += loss;
      diag.accumulate(batch);

      grads.fill_zero();
      out.model.backward(cache, demb, grads);
      adam_step(out.model.params(), grads, adam, adam_cfg, out.model.spec());
    }

    TrainLogRecord rec;
    rec.epoch = epoch;
    rec.loss = loss_sum / steps;
    rec.cos_pos = diag.pos_n > 0 ? diag.pos_sum / diag.pos_n : 0.0;
    rec.cos_neg_reg = diag.neg_reg_n > 0 ? diag.neg_reg_sum / diag.neg_reg_n : 0.0;
    if (cfg.method == Method::gameclr)
      rec.cos_neg_syn = diag.neg_syn_n > 0 ? diag.neg_syn_sum / diag.neg_syn_n : 0.0;
    if (cfg.record_timing) {
      const auto t1 = std::chrono::steady_clock::now();
      rec.seconds = std::chrono::duration<double>(t1 - t0).count();
    }
    out.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Train-log CSV: epoch,loss,cos_pos,cos_neg_reg,cos_neg_syn,seconds with nine
// significant digits; cos_neg_syn stays empty for SimCLR rows.
// ---------------------------------------------------------------------------
inline constexpr const char* kTrainLogHeader = "epoch,loss,cos_pos,cos_neg_reg,cos_neg_syn,seconds";

inline void write_train_log(const std::vector<TrainLogRecord>& records,
                            const std::filesystem::path& path) {
  std::string out = std::string(kTrainLogHeader) + "\n";
  for (const TrainLogRecord& r : records) {
    out += std::to_string(r.epoch);
    out += ',';
    out += detail::format_double(r.loss, 9);
    out += ',';
    out += detail::format_double(r.cos_pos, 9);
    out += ',';
    out += detail::format_double(r.cos_neg_reg, 9);
    out += ',';
    if (r.cos_neg_syn.has_value()) out += detail::format_double(*r.cos_neg_syn, 9);
    out += ',';
    out += detail::format_double(r.seconds, 9);
    out += '\n';
  }
  if (path.has_parent_path()) detail::ensure_dir(path.parent_path());
  detail::write_file(path, out);
}

inline std::vector<TrainLogRecord> read_train_log(const std::filesystem::path& path) {
  const auto lines = detail::split_lines(detail::read_file(path));
  if (lines.empty() || lines[0] != kTrainLogHeader)
    throw IoError(path.string() + ": train log header mismatch");
  std::vector<TrainLogRecord> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = detail::split_csv_line(lines[i]);
    if (f.size() != 6) throw IoError(path.string() + ": train log row needs 6 fields");
    TrainLogRecord r;
    r.epoch = static_cast<int>(detail::parse_long(f[0], "train log"));
    r.loss = detail::parse_double(f[1], "train log");
    r.cos_pos = detail::parse_double(f[2], "train log");
    r.cos_neg_reg = detail::parse_double(f[3], "train log");
    if (!f[4].empty()) r.cos_neg_syn = detail::parse_double(f[4], "train log");
    r.seconds = detail::parse_double(f[5], "train log");
    out.push_back(r);
  }
  return out;
}

}  // namespace gameclr
