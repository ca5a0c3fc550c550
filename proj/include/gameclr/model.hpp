#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "gameclr/contrastive.hpp"
#include "gameclr/errors.hpp"
#include "gameclr/image.hpp"
#include "gameclr/matrix.hpp"
#include "gameclr/parallel.hpp"
#include "gameclr/rng.hpp"

namespace gameclr {

// Encoder: conv(3x3, stride 2, pad 1) x3 with ReLU, global average pool,
// linear to the representation. Projector: dense+ReLU+dense, L2-normalized.
struct ArchSpec {
  int image_size = kImageSize;
  int in_channels = kImageChannels;
  int conv1_channels = 8;
  int conv2_channels = 16;
  int conv3_channels = 32;
  int rep_dim = 64;
  int hidden_dim = 64;
  int emb_dim = 32;

  static constexpr int conv_out(int n) { return (n - 1) / 2 + 1; }
  int s1() const { return conv_out(image_size); }
  int s2() const { return conv_out(s1()); }
  int s3() const { return conv_out(s2()); }

  bool operator==(const ArchSpec&) const = default;
};

template <typename T>
struct Params {
  std::vector<T> conv1_w, conv1_b;
  std::vector<T> conv2_w, conv2_b;
  std::vector<T> conv3_w, conv3_b;
  std::vector<T> fc_w, fc_b;
  std::vector<T> proj1_w, proj1_b;
  std::vector<T> proj2_w, proj2_b;

  void allocate(const ArchSpec& a) {
    conv1_w.assign(static_cast<std::size_t>(a.conv1_channels) * a.in_channels * 9, T{});
    conv1_b.assign(a.conv1_channels, T{});
    conv2_w.assign(static_cast<std::size_t>(a.conv2_channels) * a.conv1_channels * 9, T{});
    conv2_b.assign(a.conv2_channels, T{});
    conv3_w.assign(static_cast<std::size_t>(a.conv3_channels) * a.conv2_channels * 9, T{});
    conv3_b.assign(a.conv3_channels, T{});
    fc_w.assign(static_cast<std::size_t>(a.rep_dim) * a.conv3_channels, T{});
    fc_b.assign(a.rep_dim, T{});
    proj1_w.assign(static_cast<std::size_t>(a.hidden_dim) * a.rep_dim, T{});
    proj1_b.assign(a.hidden_dim, T{});
    proj2_w.assign(static_cast<std::size_t>(a.emb_dim) * a.hidden_dim, T{});
    proj2_b.assign(a.emb_dim, T{});
  }

  // Declaration order; serialization, Adam and the gradient check all rely on
  // this enumeration being stable.
  template <typename F>
  void for_each(F&& f) {
    f(conv1_w); f(conv1_b); f(conv2_w); f(conv2_b); f(conv3_w); f(conv3_b);
    f(fc_w); f(fc_b); f(proj1_w); f(proj1_b); f(proj2_w); f(proj2_b);
  }
  template <typename F>
  void for_each(F&& f) const {
    f(conv1_w); f(conv1_b); f(conv2_w); f(conv2_b); f(conv3_w); f(conv3_b);
    f(fc_w); f(fc_b); f(proj1_w); f(proj1_b); f(proj2_w); f(proj2_b);
  }

  std::size_t count() const {
    std::size_t n = 0;
    for_each([&n](const std::vector<T>& v) { n += v.size(); });
    return n;
  }
  void fill_zero() {
    for_each([](std::vector<T>& v) { std::fill(v.begin(), v.end(), T{}); });
  }
};

template <typename T>
struct ForwardStats {
  T min_abs_preact = std::numeric_limits<T>::max();
  T min_unorm = std::numeric_limits<T>::max();
};

template <typename T>
struct ForwardCache {
  int batch = 0;
  std::vector<T> x, h1, h2, h3, pooled, rep, ph, u;
  std::vector<T> unorm;
  std::vector<std::uint8_t> degenerate;
  Matrix<T> emb;
};

namespace detail {

template <typename T>
inline void conv_forward(const T* in, int cin, int s, const T* w, const T* b, int cout, T* out) {
  const int so = ArchSpec::conv_out(s);
  for (int co = 0; co < cout; ++co) {
    T* op = out + static_cast<std::size_t>(co) * so * so;
    std::fill(op, op + static_cast<std::size_t>(so) * so, b[co]);
    for (int ci = 0; ci < cin; ++ci) {
      const T* ip = in + static_cast<std::size_t>(ci) * s * s;
      const T* wp = w + (static_cast<std::size_t>(co) * cin + ci) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        const int oy_lo = (ky == 0) ? 1 : 0;
        const int oy_hi = std::min(so - 1, (s - ky) / 2);
        for (int kx = 0; kx < 3; ++kx) {
          const T wv = wp[ky * 3 + kx];
          const int ox_lo = (kx == 0) ? 1 : 0;
          const int ox_hi = std::min(so - 1, (s - kx) / 2);
          for (int oy = oy_lo; oy <= oy_hi; ++oy) {
            const T* irow = ip + static_cast<std::size_t>(2 * oy + ky - 1) * s + (kx - 1);
            T* orow = op + static_cast<std::size_t>(oy) * so;
            for (int ox = ox_lo; ox <= ox_hi; ++ox) orow[ox] += wv * irow[2 * ox];
          }
        }
      }
    }
  }
}

// din, dw, db are accumulated into; din may be null for the first layer.
template <typename T>
inline void conv_backward(const T* in, int cin, int s, const T* w, int cout, const T* dout,
                          T* dw, T* db, T* din) {
  const int so = ArchSpec::conv_out(s);
  for (int co = 0; co < cout; ++co) {
    const T* dop = dout + static_cast<std::size_t>(co) * so * so;
    T acc_b{};
    for (int i = 0; i < so * so; ++i) acc_b += dop[i];
    db[co] += acc_b;
    for (int ci = 0; ci < cin; ++ci) {
      const T* ip = in + static_cast<std::size_t>(ci) * s * s;
      T* dip = (din != nullptr) ? din + static_cast<std::size_t>(ci) * s * s : nullptr;
      const T* wp = w + (static_cast<std::size_t>(co) * cin + ci) * 9;
      T* dwp = dw + (static_cast<std::size_t>(co) * cin + ci) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        const int oy_lo = (ky == 0) ? 1 : 0;
        const int oy_hi = std::min(so - 1, (s - ky) / 2);
        for (int kx = 0; kx < 3; ++kx) {
          const T wv = wp[ky * 3 + kx];
          const int ox_lo = (kx == 0) ? 1 : 0;
          const int ox_hi = std::min(so - 1, (s - kx) / 2);
          T acc_w{};
          for (int oy = oy_lo; oy <= oy_hi; ++oy) {
            const T* irow = ip + static_cast<std::size_t>(2 * oy + ky - 1) * s + (kx - 1);
            const T* dorow = dop + static_cast<std::size_t>(oy) * so;
            if (dip != nullptr) {
              T* dirow = dip + static_cast<std::size_t>(2 * oy + ky - 1) * s + (kx - 1);
              for (int ox = ox_lo; ox <= ox_hi; ++ox) {
                const T g = dorow[ox];
                acc_w += g * irow[2 * ox];
                dirow[2 * ox] += wv * g;
              }
            } else {
              for (int ox = ox_lo; ox <= ox_hi; ++ox) acc_w += dorow[ox] * irow[2 * ox];
            }
          }
          dwp[ky * 3 + kx] += acc_w;
        }
      }
    }
  }
}

template <typename T>
inline void relu_inplace(T* v, std::size_t n, T* min_abs) {
  if (min_abs != nullptr) {
    for (std::size_t i = 0; i < n; ++i) {
      const T a = v[i] < T{} ? -v[i] : v[i];
      if (a < *min_abs) *min_abs = a;
      if (v[i] < T{}) v[i] = T{};
    }
  } else {
    for (std::size_t i = 0; i < n; ++i)
      if (v[i] < T{}) v[i] = T{};
  }
}

template <typename T>
inline void dense_forward(const T* in, int nin, const T* w, const T* b, int nout, T* out) {
  for (int o = 0; o < nout; ++o) {
    const T* wr = w + static_cast<std::size_t>(o) * nin;
    T acc = b[o];
    for (int i = 0; i < nin; ++i) acc += wr[i] * in[i];
    out[o] = acc;
  }
}

}  // namespace detail

template <typename T>
class Model {
 public:
  explicit Model(const ArchSpec& spec = {}) : spec_(spec) { params_.allocate(spec); }

  const ArchSpec& spec() const { return spec_; }
  Params<T>& params() { return params_; }
  const Params<T>& params() const { return params_; }
  std::size_t param_count() const { return params_.count(); }

  // He-uniform weights (bound sqrt(6/fan_in)), zero biases. The draw order is
  // the parameter declaration order, so equal seeds give bit-equal params.
  void init(std::uint64_t seed) {
    Rng rng(seed);
    const ArchSpec& a = spec_;
    const auto fill = [&rng](std::vector<T>& w, int fan_in) {
      const double bound = std::sqrt(6.0 / fan_in);
      for (T& v : w) v = static_cast<T>(rng.uniform(-bound, bound));
    };
    fill(params_.conv1_w, a.in_channels * 9);
    fill(params_.conv2_w, a.conv1_channels * 9);
    fill(params_.conv3_w, a.conv2_channels * 9);
    fill(params_.fc_w, a.conv3_channels);
    fill(params_.proj1_w, a.rep_dim);
    fill(params_.proj2_w, a.hidden_dim);
    std::fill(params_.conv1_b.begin(), params_.conv1_b.end(), T{});
    std::fill(params_.conv2_b.begin(), params_.conv2_b.end(), T{});
    std::fill(params_.conv3_b.begin(), params_.conv3_b.end(), T{});
    std::fill(params_.fc_b.begin(), params_.fc_b.end(), T{});
    std::fill(params_.proj1_b.begin(), params_.proj1_b.end(), T{});
    std::fill(params_.proj2_b.begin(), params_.proj2_b.end(), T{});
  }

  std::vector<T> image_to_chw(const Image& im) const {
    if (im.height != spec_.image_size || im.width != spec_.image_size ||
        im.channels != spec_.in_channels)
      throw ShapeMismatch("image does not match model input");
    std::vector<T> out(static_cast<std::size_t>(im.channels) * im.height * im.width);
    for (int c = 0; c < im.channels; ++c)
      for (int y = 0; y < im.height; ++y)
        for (int x = 0; x < im.width; ++x)
          out[(static_cast<std::size_t>(c) * im.height + y) * im.width + x] =
              static_cast<T>(im.at(y, x, c));
    return out;
  }

  // Encoder only: batch of images to batch x rep_dim representations.
  Matrix<T> encode(const std::vector<Image>& batch) const {
    const ArchSpec& a = spec_;
    Matrix<T> reps(static_cast<int>(batch.size()), a.rep_dim);
    parallel_for(static_cast<int>(batch.size()), [&](int i) {
      std::vector<T> x = image_to_chw(batch[i]);
      std::vector<T> h1(static_cast<std::size_t>(a.conv1_channels) * a.s1() * a.s1());
      std::vector<T> h2(static_cast<std::size_t>(a.conv2_channels) * a.s2() * a.s2());
      std::vector<T> h3(static_cast<std::size_t>(a.conv3_channels) * a.s3() * a.s3());
      std::vector<T> pooled(a.conv3_channels);
      encode_one(x.data(), h1.data(), h2.data(), h3.data(), pooled.data(), reps.row(i), nullptr);
    });
    return reps;
  }

  // Projection head; rows with pre-normalization norm under 1e-12 fall back to
  // the first basis vector and bump *degenerate (the warning counter).
  Matrix<T> project(const Matrix<T>& reps, long* degenerate = nullptr) const {
    const ArchSpec& a = spec_;
    if (reps.cols != a.rep_dim) throw ShapeMismatch("representation dim");
    Matrix<T> emb(reps.rows, a.emb_dim);
    long degen = 0;
    for (int r = 0; r < reps.rows; ++r) {
      std::vector<T> ph(a.hidden_dim), u(a.emb_dim);
      detail::dense_forward(reps.row(r), a.rep_dim, params_.proj1_w.data(),
                            params_.proj1_b.data(), a.hidden_dim, ph.data());
      detail::relu_inplace(ph.data(), ph.size(), static_cast<T*>(nullptr));
      detail::dense_forward(ph.data(), a.hidden_dim, params_.proj2_w.data(),
                            params_.proj2_b.data(), a.emb_dim, u.data());
      T norm2{};
      for (T v : u) norm2 += v * v;
      const T norm = std::sqrt(norm2);
      if (norm < static_cast<T>(1e-12)) {
        ++degen;
        emb.at(r, 0) = T{1};
        for (int k = 1; k < a.emb_dim; ++k) emb.at(r, k) = T{};
      } else {
        for (int k = 0; k < a.emb_dim; ++k) emb.at(r, k) = u[k] / norm;
      }
    }
    if (degenerate != nullptr) *degenerate += degen;
    return emb;
  }

  // Full forward with every intermediate kept for backward.
  void forward(const std::vector<Image>& batch, ForwardCache<T>& cache,
               ForwardStats<T>* stats = nullptr, long* degenerate = nullptr) const {
    const ArchSpec& a = spec_;
    const int B = static_cast<int>(batch.size());
    cache.batch = B;
    const std::size_t nx = static_cast<std::size_t>(a.in_channels) * a.image_size * a.image_size;
    const std::size_t n1 = static_cast<std::size_t>(a.conv1_channels) * a.s1() * a.s1();
    const std::size_t n2 = static_cast<std::size_t>(a.conv2_channels) * a.s2() * a.s2();
    const std::size_t n3 = static_cast<std::size_t>(a.conv3_channels) * a.s3() * a.s3();
    cache.x.resize(nx * B);
    cache.h1.resize(n1 * B);
    cache.h2.resize(n2 * B);
    cache.h3.resize(n3 * B);
    cache.pooled.resize(static_cast<std::size_t>(a.conv3_channels) * B);
    cache.rep.resize(static_cast<std::size_t>(a.rep_dim) * B);
    cache.ph.resize(static_cast<std::size_t>(a.hidden_dim) * B);
    cache.u.resize(static_cast<std::size_t>(a.emb_dim) * B);
    cache.unorm.assign(B, T{});
    cache.degenerate.assign(B, 0);
    cache.emb = Matrix<T>(B, a.emb_dim);

    std::vector<ForwardStats<T>> item_stats(stats != nullptr ? B : 0);
    parallel_for(B, [&](int i) {
      ForwardStats<T>* st = stats != nullptr ? &item_stats[i] : nullptr;
      std::vector<T> chw = image_to_chw(batch[i]);
      std::copy(chw.begin(), chw.end(), cache.x.begin() + nx * i);
      T* x = cache.x.data() + nx * i;
      T* h1 = cache.h1.data() + n1 * i;
      T* h2 = cache.h2.data() + n2 * i;
      T* h3 = cache.h3.data() + n3 * i;
      T* pooled = cache.pooled.data() + static_cast<std::size_t>(a.conv3_channels) * i;
      T* rep = cache.rep.data() + static_cast<std::size_t>(a.rep_dim) * i;
      T* min_abs = st != nullptr ? &st->min_abs_preact : nullptr;
      encode_one(x, h1, h2, h3, pooled, rep, min_abs);
      T* ph = cache.ph.data() + static_cast<std::size_t>(a.hidden_dim) * i;
      T* u = cache.u.data() + static_cast<std::size_t>(a.emb_dim) * i;
      detail::dense_forward(rep, a.rep_dim, params_.proj1_w.data(), params_.proj1_b.data(),
                            a.hidden_dim, ph);
      detail::relu_inplace(ph, static_cast<std::size_t>(a.hidden_dim), min_abs);
      detail::dense_forward(ph, a.hidden_dim, params_.proj2_w.data(), params_.proj2_b.data(),
                            a.emb_dim, u);
      T norm2{};
      for (int k = 0; k < a.emb_dim; ++k) norm2 += u[k] * u[k];
      const T norm = std::sqrt(norm2);
      cache.unorm[i] = norm;
      if (st != nullptr && norm < st->min_unorm) st->min_unorm = norm;
      T* z = cache.emb.row(i);
      if (norm < static_cast<T>(1e-12)) {
        cache.degenerate[i] = 1;
        z[0] = T{1};
        for (int k = 1; k < a.emb_dim; ++k) z[k] = T{};
      } else {
        for (int k = 0; k < a.emb_dim; ++k) z[k] = u[k] / norm;
      }
    });
    if (stats != nullptr)
      for (const auto& st : item_stats) {
        stats->min_abs_preact = std::min(stats->min_abs_preact, st.min_abs_preact);
        stats->min_unorm = std::min(stats->min_unorm, st.min_unorm);
      }
    if (degenerate != nullptr)
      for (int i = 0; i < B; ++i) *degenerate += cache.degenerate[i];
  }

  // Accumulates d(loss)/d(params) into `grads` from the cached forward pass
  // and d(loss)/d(embedding). Items are summed in fixed blocks of eight and
  // blocks reduced in index order, so the result does not depend on the
  // worker count.
  void backward(const ForwardCache<T>& cache, const Matrix<double>& demb,
                Params<T>& grads) const {
    const ArchSpec& a = spec_;
    const int B = cache.batch;
    if (demb.rows != B || demb.cols != a.emb_dim) throw ShapeMismatch("demb");
    if (grads.count() != params_.count()) grads.allocate(a);

    constexpr int kBlock = 8;
    const int blocks = (B + kBlock - 1) / kBlock;
    std::vector<Params<T>> block_grads(static_cast<std::size_t>(blocks));
    parallel_for(blocks, [&](int bi) {
      Params<T>& g = block_grads[static_cast<std::size_t>(bi)];
      g.allocate(a);
      std::vector<T> dh1(static_cast<std::size_t>(a.conv1_channels) * a.s1() * a.s1());
      std::vector<T> dh2(static_cast<std::size_t>(a.conv2_channels) * a.s2() * a.s2());
      std::vector<T> dh3(static_cast<std::size_t>(a.conv3_channels) * a.s3() * a.s3());
      const int lo = static_cast<int>(bi) * kBlock;
      const int hi = std::min(B, lo + kBlock);
      for (int i = lo; i < hi; ++i) backward_one(cache, demb, i, g, dh1, dh2, dh3);
    });
    for (const Params<T>& g : block_grads) {
      auto it = [](std::vector<T>& dst, const std::vector<T>& src) {
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
      };
      it(grads.conv1_w, g.conv1_w); it(grads.conv1_b, g.conv1_b);
      it(grads.conv2_w, g.conv2_w); it(grads.conv2_b, g.conv2_b);
      it(grads.conv3_w, g.conv3_w); it(grads.conv3_b, g.conv3_b);
      it(grads.fc_w, g.fc_w); it(grads.fc_b, g.fc_b);
      it(grads.proj1_w, g.proj1_w); it(grads.proj1_b, g.proj1_b);
      it(grads.proj2_w, g.proj2_w); it(grads.proj2_b, g.proj2_b);
    }
  }

 private:
  void encode_one(const T* x, T* h1, T* h2, T* h3, T* pooled, T* rep, T* min_abs) const {
    const ArchSpec& a = spec_;
    detail::conv_forward(x, a.in_channels, a.image_size, params_.conv1_w.data(),
                         params_.conv1_b.data(), a.conv1_channels, h1);
    detail::relu_inplace(h1, static_cast<std::size_t>(a.conv1_channels) * a.s1() * a.s1(), min_abs);
    detail::conv_forward(h1, a.conv1_channels, a.s1(), params_.conv2_w.data(),
                         params_.conv2_b.data(), a.conv2_channels, h2);
    detail::relu_inplace(h2, static_cast<std::size_t>(a.conv2_channels) * a.s2() * a.s2(), min_abs);
    detail::conv_forward(h2, a.conv2_channels, a.s2(), params_.conv3_w.data(),
                         params_.conv3_b.data(), a.conv3_channels, h3);
    detail::relu_inplace(h3, static_cast<std::size_t>(a.conv3_channels) * a.s3() * a.s3(), min_abs);
    const T inv = T{1} / static_cast<T>(a.s3() * a.s3());
    for (int c = 0; c < a.conv3_channels; ++c) {
      const T* plane = h3 + static_cast<std::size_t>(c) * a.s3() * a.s3();
      T acc{};
      for (int i = 0; i < a.s3() * a.s3(); ++i) acc += plane[i];
      pooled[c] = acc * inv;
    }
    detail::dense_forward(pooled, a.conv3_channels, params_.fc_w.data(), params_.fc_b.data(),
                          a.rep_dim, rep);
  }

  void backward_one(const ForwardCache<T>& cache, const Matrix<double>& demb, int i,
                    Params<T>& g, std::vector<T>& dh1, std::vector<T>& dh2,
                    std::vector<T>& dh3) const {
    const ArchSpec& a = spec_;
    const std::size_t nx = static_cast<std::size_t>(a.in_channels) * a.image_size * a.image_size;
    const std::size_t n1 = static_cast<std::size_t>(a.conv1_channels) * a.s1() * a.s1();
    const std::size_t n2 = static_cast<std::size_t>(a.conv2_channels) * a.s2() * a.s2();
    const std::size_t n3 = static_cast<std::size_t>(a.conv3_channels) * a.s3() * a.s3();
    const T* x = cache.x.data() + nx * i;
    const T* h1 = cache.h1.data() + n1 * i;
    const T* h2 = cache.h2.data() + n2 * i;
    const T* h3 = cache.h3.data() + n3 * i;
    const T* pooled = cache.pooled.data() + static_cast<std::size_t>(a.conv3_channels) * i;
    const T* rep = cache.rep.data() + static_cast<std::size_t>(a.rep_dim) * i;
    const T* ph = cache.ph.data() + static_cast<std::size_t>(a.hidden_dim) * i;
    const T* u = cache.u.data() + static_cast<std::size_t>(a.emb_dim) * i;

    // normalize backward: du = (dz - z (z . dz)) / ||u||; degenerate rows
    // emitted a constant, so their gradient is zero.
    std::vector<T> du(a.emb_dim, T{});
    if (cache.degenerate[i] == 0) {
      const double* dz = demb.row(i);
      const T norm = cache.unorm[i];
      double zdot = 0.0;
      for (int k = 0; k < a.emb_dim; ++k)
        zdot += static_cast<double>(u[k] / norm) * dz[k];
      for (int k = 0; k < a.emb_dim; ++k)
        du[k] = static_cast<T>((dz[k] - static_cast<double>(u[k] / norm) * zdot) /
                               static_cast<double>(norm));
    }

    // proj2
    std::vector<T> dph(a.hidden_dim, T{});
    for (int o = 0; o < a.emb_dim; ++o) {
      const T d = du[o];
      if (d == T{}) continue;
      T* wrow = g.proj2_w.data() + static_cast<std::size_t>(o) * a.hidden_dim;
      const T* wsrc = params_.proj2_w.data() + static_cast<std::size_t>(o) * a.hidden_dim;
      for (int k = 0; k < a.hidden_dim; ++k) {
        wrow[k] += d * ph[k];
        dph[k] += wsrc[k] * d;
      }
      g.proj2_b[o] += d;
    }
    // proj1 (through its ReLU)
    std::vector<T> drep(a.rep_dim, T{});
    for (int o = 0; o < a.hidden_dim; ++o) {
      if (ph[o] <= T{}) continue;
      const T d = dph[o];
      T* wrow = g.proj1_w.data() + static_cast<std::size_t>(o) * a.rep_dim;
      const T* wsrc = params_.proj1_w.data() + static_cast<std::size_t>(o) * a.rep_dim;
      for (int k = 0; k < a.rep_dim; ++k) {
        wrow[k] += d * rep[k];
        drep[k] += wsrc[k] * d;
      }
      g.proj1_b[o] += d;
    }
    // fc (linear)
    std::vector<T> dpooled(a.conv3_channels, T{});
    for (int o = 0; o < a.rep_dim; ++o) {
      const T d = drep[o];
      T* wrow = g.fc_w.data() + static_cast<std::size_t>(o) * a.conv3_channels;
      const T* wsrc = params_.fc_w.data() + static_cast<std::size_t>(o) * a.conv3_channels;
      for (int k = 0; k < a.conv3_channels; ++k) {
        wrow[k] += d * pooled[k];
        dpooled[k] += wsrc[k] * d;
      }
      g.fc_b[o] += d;
    }
    // pool backward + conv3 ReLU mask
    const T inv = T{1} / static_cast<T>(a.s3() * a.s3());
    for (int c = 0; c < a.conv3_channels; ++c) {
      const T d = dpooled[c] * inv;
      const T* plane = h3 + static_cast<std::size_t>(c) * a.s3() * a.s3();
      T* dplane = dh3.data() + static_cast<std::size_t>(c) * a.s3() * a.s3();
      for (int k = 0; k < a.s3() * a.s3(); ++k) dplane[k] = plane[k] > T{} ? d : T{};
    }
    std::fill(dh2.begin(), dh2.end(), T{});
    detail::conv_backward(h2, a.conv2_channels, a.s2(), params_.conv3_w.data(), a.conv3_channels,
                          dh3.data(), g.conv3_w.data(), g.conv3_b.data(), dh2.data());
    for (std::size_t k = 0; k < n2; ++k)
      if (h2[k] <= T{}) dh2[k] = T{};
    std::fill(dh1.begin(), dh1.end(), T{});
    detail::conv_backward(h1, a.conv1_channels, a.s1(), params_.conv2_w.data(), a.conv2_channels,
                          dh2.data(), g.conv2_w.data(), g.conv2_b.data(), dh1.data());
    for (std::size_t k = 0; k < n1; ++k)
      if (h1[k] <= T{}) dh1[k] = T{};
    detail::conv_backward(x, a.in_channels, a.image_size, params_.conv1_w.data(), a.conv1_channels,
                          dh1.data(), g.conv1_w.data(), g.conv1_b.data(), static_cast<T*>(nullptr));
  }

  ArchSpec spec_;
  Params<T> params_;
};

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------
struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  Params<T> m, v;
  long t = 0;
};

template <typename T>
inline void adam_step(Params<T>& params, const Params<T>& grads, AdamState<T>& state,
                      const AdamConfig& cfg, const ArchSpec& arch) {
  if (state.m.count() == 0) {
    state.m.allocate(arch);
    state.v.allocate(arch);
  }
  if (grads.count() != params.count() || state.m.count() != params.count())
    throw ShapeMismatch("adam buffers");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  std::vector<std::vector<T>*> ps, ms, vs;
  std::vector<const std::vector<T>*> gs;
  params.for_each([&ps](std::vector<T>& a) { ps.push_back(&a); });
  grads.for_each([&gs](const std::vector<T>& a) { gs.push_back(&a); });
  state.m.for_each([&ms](std::vector<T>& a) { ms.push_back(&a); });
  state.v.for_each([&vs](std::vector<T>& a) { vs.push_back(&a); });
  for (std::size_t j = 0; j < ps.size(); ++j) {
    std::vector<T>& p = *ps[j];
    const std::vector<T>& gvec = *gs[j];
    std::vector<T>& m = *ms[j];
    std::vector<T>& v = *vs[j];
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double g = static_cast<double>(gvec[k]);
      const double mn = cfg.beta1 * static_cast<double>(m[k]) + (1.0 - cfg.beta1) * g;
      const double vn = cfg.beta2 * static_cast<double>(v[k]) + (1.0 - cfg.beta2) * g * g;
      m[k] = static_cast<T>(mn);
      v[k] = static_cast<T>(vn);
      const double mhat = mn / bc1;
      const double vhat = vn / bc2;
      p[k] = static_cast<T>(static_cast<double>(p[k]) - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
    }
  }
}

// ---------------------------------------------------------------------------
// Gradient verification: analytic backprop vs central finite differences on a
// small random instance at 64-bit precision. Instances whose ReLU inputs or
// embedding norms sit too close to a kink for the 1e-5 step are redrawn from
// the next derived seed, keeping the check deterministic per seed.
// ---------------------------------------------------------------------------
inline ArchSpec toy_arch_spec() {
  ArchSpec a;
  a.image_size = 8;
  a.in_channels = 3;
  a.conv1_channels = 4;
  a.conv2_channels = 5;
  a.conv3_channels = 6;
  a.rep_dim = 7;
  a.hidden_dim = 8;
  a.emb_dim = 5;
  return a;
}

inline double gradient_check(const ArchSpec& arch, std::uint64_t seed,
                             bool perturb_one_weight = false) {
  constexpr double kStep = 1e-5;
  constexpr double kKinkGuard = 5e-4;
  constexpr double kNormGuard = 5e-2;
  constexpr int kBatch = 6;

  Model<double> model(arch);
  std::vector<Image> batch;
  BatchLossTerms terms;
  {
    AnchorTerms a0;
    a0.anchor = 0;
    a0.positives = {1, 2};
    a0.negatives = {3, 4, 5};
    AnchorTerms a1;
    a1.anchor = 3;
    a1.positives = {4};
    a1.negatives = {0, 1, 2, 5};
    terms.anchors = {a0, a1};
    terms.normalizer = 2.0;
  }
  const double tau = 0.2;

  for (int attempt = 0; attempt < 100; ++attempt) {
    const std::uint64_t s = fold_seed(seed, static_cast<std::uint64_t>(attempt));
    model.init(s);
    Rng rng(fold_seed(s, 0x1a6e5u));
    batch.assign(kBatch, Image{});
    for (auto& im : batch) {
      im = Image::zeros(arch.image_size, arch.image_size);
      for (auto& v : im.data) v = static_cast<float>(rng.uniform());
    }
    ForwardCache<double> cache;
    ForwardStats<double> stats;
    model.forward(batch, cache, &stats);
    if (stats.min_abs_preact < kKinkGuard || stats.min_unorm < kNormGuard) continue;

    Matrix<double> demb;
    batch_loss_and_grad(cache.emb, terms, tau, &demb);
    Params<double> grads;
    grads.allocate(arch);
    model.backward(cache, demb, grads);

    std::vector<std::vector<double>*> param_arrays, grad_arrays;
    model.params().for_each([&param_arrays](std::vector<double>& a) { param_arrays.push_back(&a); });
    grads.for_each([&grad_arrays](std::vector<double>& a) { grad_arrays.push_back(&a); });

    if (perturb_one_weight) {
      double best = -1.0;
      double* target = nullptr;
      for (auto* arr : grad_arrays)
        for (double& gv : *arr)
          if (std::abs(gv) > best) {
            best = std::abs(gv);
            target = &gv;
          }
      if (target != nullptr) *target += 1e-2;
    }

    const auto eval_loss = [&]() {
      ForwardCache<double> c;
      model.forward(batch, c);
      return batch_loss_and_grad(c.emb, terms, tau);
    };
    double worst = 0.0;
    for (std::size_t ai = 0; ai < param_arrays.size(); ++ai) {
      std::vector<double>& p = *param_arrays[ai];
      const std::vector<double>& gvec = *grad_arrays[ai];
      for (std::size_t k = 0; k < p.size(); ++k) {
        const double keep = p[k];
        p[k] = keep + kStep;
        const double lp = eval_loss();
        p[k] = keep - kStep;
        const double lm = eval_loss();
        p[k] = keep;
        const double fd = (lp - lm) / (2.0 * kStep);
        const double a = gvec[k];
        const double den = std::max(std::abs(a), std::abs(fd));
        if (den < 1e-5) continue;
        worst = std::max(worst, std::abs(a - fd) / den);
      }
    }
    return worst;
  }
  throw NumericalError("gradient check could not find a kink-free instance");
}

}  // namespace gameclr
