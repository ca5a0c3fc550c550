#pragma once

#include <cstdint>
#include <vector>

#include "gameclr/augment.hpp"
#include "gameclr/contrastive.hpp"
#include "gameclr/errors.hpp"
#include "gameclr/image.hpp"
#include "gameclr/model.hpp"
#include "gameclr/parallel.hpp"
#include "gameclr/render.hpp"
#include "gameclr/rng.hpp"
#include "gameclr/scene.hpp"

namespace gameclr {

enum class Provenance : std::uint8_t { anchor, view, syn_pos, syn_neg };

// One training batch: the augmented views in row order, who owns each row,
// what role it plays, and the per-anchor index sets the loss runs over.
struct ContrastiveBatch {
  std::vector<Image> views;
  std::vector<Provenance> provenance;
  std::vector<int> owner;
  BatchLossTerms terms;
  Matrix<float> embeddings;
};

namespace detail {

// Sub-seed slots per anchor; keyed folding keeps every view's draw stream
// independent of evaluation order.
inline constexpr std::uint64_t kSlotAnchorPixel = 0;
inline constexpr std::uint64_t kSlotViewA = 1;
inline constexpr std::uint64_t kSlotViewB = 2;
inline constexpr std::uint64_t kSlotPosScene = 100;
inline constexpr std::uint64_t kSlotPosPixel = 200;
inline constexpr std::uint64_t kSlotNegScene = 300;
inline constexpr std::uint64_t kSlotNegPixel = 400;

}  // namespace detail

// SimCLR: two independently augmented views per anchor image. Row 2i and
// 2i+1 are the views of anchor i; each view's positive is its counterpart
// and its negatives are all views of other anchors.
inline ContrastiveBatch build_simclr_batch(const std::vector<Image>& anchors,
                                           const AugmentPolicy& policy, std::uint64_t seed,
                                           const Model<float>& model,
                                           ForwardCache<float>* cache = nullptr,
                                           long* degenerate = nullptr) {
  const int B = static_cast<int>(anchors.size());
  if (B < 2) throw BatchTooSmall("simclr needs at least 2 anchors for a non-empty negative set");
  ContrastiveBatch batch;
  const int rows = 2 * B;
  batch.views.assign(rows, Image{});
  batch.provenance.assign(rows, Provenance::view);
  batch.owner.assign(rows, 0);
  parallel_for(rows, [&](int r) {
    const int i = r / 2;
    const std::uint64_t si = fold_seed(seed, static_cast<std::uint64_t>(i));
    const std::uint64_t slot = (r % 2 == 0) ? detail::kSlotViewA : detail::kSlotViewB;
    batch.views[r] = augment_image(anchors[i], policy, fold_seed(si, slot));
    batch.owner[r] = i;
  });
  batch.terms.anchors.reserve(rows);
  for (int r = 0; r < rows; ++r) {
    AnchorTerms t;
    t.anchor = r;
    const int counterpart = (r % 2 == 0) ? r + 1 : r - 1;
    t.positives = {counterpart};
    t.negatives.reserve(rows - 2);
    for (int o = 0; o < rows; ++o)
      if (o != r && o != counterpart) t.negatives.push_back(o);
    batch.terms.anchors.push_back(std::move(t));
  }
  batch.terms.normalizer = static_cast<double>(rows);

  ForwardCache<float> local;
  ForwardCache<float>& fc = cache != nullptr ? *cache : local;
  model.forward(batch.views, fc, nullptr, degenerate);
  batch.embeddings = fc.emb;
  return batch;
}

// GameCLR: per anchor scene, one augmented anchor view, k_p synthetic
// positives (scene-preserving augment, re-rendered), and k_n synthetic
// negatives (scene-altering augment, re-rendered). All views pass the pixel
// augmentation. Negatives of an anchor are its own synthetic negatives plus
// every view owned by other anchors.
inline ContrastiveBatch build_gameclr_batch(const std::vector<SceneState>& scenes,
                                            const LossConfig& cfg, const AugmentPolicy& policy,
                                            std::uint64_t seed, const Model<float>& model,
                                            ForwardCache<float>* cache = nullptr,
                                            long* degenerate = nullptr) {
  require_valid_loss_config(cfg, true);
  const int B = static_cast<int>(scenes.size());
  if (B < 1) throw BatchTooSmall("gameclr needs at least 1 anchor scene");
  const int per = 1 + cfg.k_p + cfg.k_n;
  const int rows = B * per;

  ContrastiveBatch batch;
  batch.provenance.assign(rows, Provenance::anchor);
  batch.owner.assign(rows, 0);
  std::vector<SceneState> row_scene(rows);
  std::vector<std::uint64_t> row_pixel_seed(rows);
  for (int i = 0; i < B; ++i) {
    const std::uint64_t si = fold_seed(seed, static_cast<std::uint64_t>(i));
    const int base = i * per;
    row_scene[base] = scenes[i];
    row_pixel_seed[base] = fold_seed(si, detail::kSlotAnchorPixel);
    batch.owner[base] = i;
    for (int j = 0; j < cfg.k_p; ++j) {
      const int r = base + 1 + j;
      row_scene[r] =
          scene_preserving_augment(scenes[i], fold_seed(si, detail::kSlotPosScene + j));
      row_pixel_seed[r] = fold_seed(si, detail::kSlotPosPixel + j);
      batch.provenance[r] = Provenance::syn_pos;
      batch.owner[r] = i;
    }
    for (int j = 0; j < cfg.k_n; ++j) {
      const int r = base + 1 + cfg.k_p + j;
      row_scene[r] = scene_altering_augment(scenes[i], fold_seed(si, detail::kSlotNegScene + j));
      row_pixel_seed[r] = fold_seed(si, detail::kSlotNegPixel + j);
      batch.provenance[r] = Provenance::syn_neg;
      batch.owner[r] = i;
    }
  }
  batch.views.assign(rows, Image{});
  parallel_for(rows, [&](int r) {
    batch.views[r] = augment_image(render(row_scene[r]), policy, row_pixel_seed[r]);
  });

  batch.terms.anchors.reserve(B);
  for (int i = 0; i < B; ++i) {
    const int base = i * per;
    AnchorTerms t;
    t.anchor = base;
    for (int j = 0; j < cfg.k_p; ++j) t.positives.push_back(base + 1 + j);
    t.negatives.reserve(cfg.k_n + (B - 1) * per);
    for (int j = 0; j < cfg.k_n; ++j) t.negatives.push_back(base + 1 + cfg.k_p + j);
    for (int r = 0; r < rows; ++r)
      if (batch.owner[r] != i) t.negatives.push_back(r);
    batch.terms.anchors.push_back(std::move(t));
  }
  batch.terms.normalizer = static_cast<double>(B);

  ForwardCache<float> local;
  ForwardCache<float>& fc = cache != nullptr ? *cache : local;
  model.forward(batch.views, fc, nullptr, degenerate);
  batch.embeddings = fc.emb;
  return batch;
}

// Frozen-data variant: the synthetic views were rendered at dataset-build
// time; only the pixel augmentation is applied here. `groups` lists, per
// anchor, the pre-rendered [anchor, k_p positives, k_n negatives] images.
inline ContrastiveBatch build_gameclr_batch_frozen(
    const std::vector<std::vector<Image>>& groups, const LossConfig& cfg,
    const AugmentPolicy& policy, std::uint64_t seed, const Model<float>& model,
    ForwardCache<float>* cache = nullptr, long* degenerate = nullptr) {
  require_valid_loss_config(cfg, true);
  const int B = static_cast<int>(groups.size());
  if (B < 1) throw BatchTooSmall("gameclr needs at least 1 anchor group");
  const int per = 1 + cfg.k_p + cfg.k_n;
  for (const auto& g : groups)
    if (static_cast<int>(g.size()) != per)
      throw DatasetMethodMismatch("group size does not match k_p/k_n");
  const int rows = B * per;

  ContrastiveBatch batch;
  batch.views.assign(rows, Image{});
  batch.provenance.assign(rows, Provenance::anchor);
  batch.owner.assign(rows, 0);
  parallel_for(rows, [&](int r) {
    const int i = r / per;
    const int slot = r % per;
    const std::uint64_t si = fold_seed(seed, static_cast<std::uint64_t>(i));
    std::uint64_t pixel_seed;
    if (slot == 0) {
      pixel_seed = fold_seed(si, detail::kSlotAnchorPixel);
    } else if (slot <= cfg.k_p) {
      pixel_seed = fold_seed(si, detail::kSlotPosPixel + (slot - 1));
      batch.provenance[r] = Provenance::syn_pos;
    } else {
      pixel_seed = fold_seed(si, detail::kSlotNegPixel + (slot - 1 - cfg.k_p));
      batch.provenance[r] = Provenance::syn_neg;
    }
    batch.owner[r] = i;
    batch.views[r] = augment_image(groups[i][slot], policy, pixel_seed);
  });

  batch.terms.anchors.reserve(B);
  for (int i = 0; i < B; ++i) {
    const int base = i * per;
    AnchorTerms t;
    t.anchor = base;
    for (int j = 0; j < cfg.k_p; ++j) t.positives.push_back(base + 1 + j);
    t.negatives.reserve(cfg.k_n + (B - 1) * per);
    for (int j = 0; j < cfg.k_n; ++j) t.negatives.push_back(base + 1 + cfg.k_p + j);
    for (int r = 0; r < rows; ++r)
      if (batch.owner[r] != i) t.negatives.push_back(r);
    batch.terms.anchors.push_back(std::move(t));
  }
  batch.terms.normalizer = static_cast<double>(B);

  ForwardCache<float> local;
  ForwardCache<float>& fc = cache != nullptr ? *cache : local;
  model.forward(batch.views, fc, nullptr, degenerate);
  batch.embeddings = fc.emb;
  return batch;
}

// Mean anchor/positive, anchor/regular-negative and anchor/synthetic-negative
// cosine accumulators, taken straight from the embeddings the loss saw.
struct DiagnosticSums {
  double pos_sum = 0.0;
  long pos_n = 0;
  double neg_reg_sum = 0.0;
  long neg_reg_n = 0;
  double neg_syn_sum = 0.0;
  long neg_syn_n = 0;

  void accumulate(const ContrastiveBatch& b) {
    const int d = b.embeddings.cols;
    const auto dot = [&](int i, int j) {
      const float* x = b.embeddings.row(i);
      const float* y = b.embeddings.row(j);
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += static_cast<double>(x[k]) * static_cast<double>(y[k]);
      return s;
    };
    for (const AnchorTerms& t : b.terms.anchors) {
      for (int p : t.positives) {
        pos_sum += dot(t.anchor, p);
        ++pos_n;
      }
      for (int n : t.negatives) {
        if (b.owner[n] == b.owner[t.anchor]) {
          neg_syn_sum += dot(t.anchor, n);
          ++neg_syn_n;
        } else {
          neg_reg_sum += dot(t.anchor, n);
          ++neg_reg_n;
        }
      }
    }
  }
};

}  // namespace gameclr
