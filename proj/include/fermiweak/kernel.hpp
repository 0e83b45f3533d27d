// Copyright 2026 The fermiweak Authors
// SPDX-License-Identifier: Apache-2.0

/**
 * @file kernel.hpp
 * @brief Interaction kernels over discretized mode tuples.
 *
 * A kernel G_{eps,eps'} lives on sectors (1,eps) x (2,eps') x (3,eps) x (4,eps)
 * with eps' = -eps, so there are two channels, keyed by eps. Tensors carry
 * copies of their axis modes, which makes norms and momentum cutoffs
 * self-contained.
 */

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fermiweak/errors.hpp"
#include "fermiweak/fock.hpp"
#include "fermiweak/sparse_operator.hpp"

namespace fermiweak {

/// Dense complex tensor indexed by one mode per axis; axis a ranges over the
/// modes of sector `sectors[a]`.
template <std::size_t N>
class SectorTensor {
 public:
  using Index = std::array<std::size_t, N>;

  SectorTensor() = default;
  SectorTensor(const ModeTable& table, const std::array<SectorId, N>& sectors) : sectors_(sectors) {
    std::size_t total = 1;
    for (std::size_t a = 0; a < N; ++a) {
      const auto modes = table.sector_modes(sectors[a]);
      axes_[a].assign(modes.begin(), modes.end());
      dims_[a] = modes.size();
      total *= dims_[a];
    }
    data_.assign(total, Complex{});
  }

  const std::array<SectorId, N>& sectors() const { return sectors_; }
  const Index& dims() const { return dims_; }
  std::size_t size() const { return data_.size(); }
  const Mode& mode(std::size_t axis, std::size_t i) const { return axes_[axis][i]; }

  std::size_t flat(const Index& idx) const {
    std::size_t f = 0;
    for (std::size_t a = 0; a < N; ++a) f = f * dims_[a] + idx[a];
    return f;
  }
  Index unflat(std::size_t f) const {
    Index idx{};
    for (std::size_t a = N; a-- > 0;) {
      idx[a] = f % dims_[a];
      f /= dims_[a];
    }
    return idx;
  }

  Complex& operator()(const Index& idx) { return data_[flat(idx)]; }
  const Complex& operator()(const Index& idx) const { return data_[flat(idx)]; }
  Complex& at_flat(std::size_t f) { return data_[f]; }
  const Complex& at_flat(std::size_t f) const { return data_[f]; }
  std::span<const Complex> values() const { return data_; }

  /// Product of the quadrature weights of an index tuple.
  double weight(const Index& idx) const {
    double w = 1.0;
    for (std::size_t a = 0; a < N; ++a) w *= axes_[a][idx[a]].weight;
    return w;
  }
  double momentum_norm(std::size_t axis, std::size_t i) const { return axes_[axis][i].momentum_norm(); }

  /// Discrete L^2 norm sqrt(sum w_1..w_N |T|^2).
  double l2_norm() const {
    double acc = 0.0;
    for (std::size_t f = 0; f < data_.size(); ++f) acc += weight(unflat(f)) * std::norm(data_[f]);
    return std::sqrt(acc);
  }

  template <typename Fn>
  void fill(Fn&& fn) {
    for (std::size_t f = 0; f < data_.size(); ++f) data_[f] = fn(unflat(f));
  }

  bool same_shape(const SectorTensor& o) const { return sectors_ == o.sectors_ && dims_ == o.dims_; }

 private:
  std::array<SectorId, N> sectors_{};
  Index dims_{};
  std::array<std::vector<Mode>, N> axes_;
  std::vector<Complex> data_;
};

using KernelTensor = SectorTensor<4>;
/// Kernel over three sectors (species 1, 2 or 3, and 4 in the variants used
/// for the creation/annihilation-triple and reduced-interaction bounds).
using ReducedKernel = SectorTensor<3>;

/// Sectors of channel eps: (1,eps), (2,-eps), (3,eps), (4,eps).
inline std::array<SectorId, 4> channel_sectors(Charge eps) {
  return {SectorId{1, eps}, SectorId{2, opposite(eps)}, SectorId{3, eps}, SectorId{4, eps}};
}

inline std::string channel_name(Charge eps) { return std::string{symbol(eps)} + symbol(opposite(eps)); }

inline constexpr std::array<Charge, 2> kChannels{Charge::Plus, Charge::Minus};

class Kernel {
 public:
  enum class Origin { Zero, Sharp, SmoothGaussian, QuarkDecay, User, Cutoff, Dilated };

  explicit Kernel(ModeTable table, Origin origin = Origin::Zero) : table_(std::move(table)), origin_(origin) {
    for (Charge eps : kChannels) {
      channels_[idx(eps)] = KernelTensor(table_, channel_sectors(eps));
      populated_[idx(eps)] = false;
      norms_[idx(eps)] = 0.0;
    }
  }

  const ModeTable& table() const { return table_; }
  Origin origin() const { return origin_; }

  /// Set when the kernel is an unmodified Gaussian exp(-sum |p_j|^2 / s^2),
  /// which admits an analytic dilation derivative.
  std::optional<double> gaussian_scale() const { return gaussian_scale_; }

  bool populated(Charge eps) const { return populated_[idx(eps)]; }
  std::vector<Charge> populated_channels() const {
    std::vector<Charge> out;
    for (Charge eps : kChannels) {
      if (populated(eps)) out.push_back(eps);
    }
    return out;
  }

  const KernelTensor& channel(Charge eps) const { return channels_[idx(eps)]; }

  void set_channel(Charge eps, KernelTensor t) {
    if (!t.same_shape(channels_[idx(eps)])) {
      throw ConfigError("kernel channel " + channel_name(eps) + " does not match the mode table sectors");
    }
    channels_[idx(eps)] = std::move(t);
    populated_[idx(eps)] = true;
    norms_[idx(eps)] = channels_[idx(eps)].l2_norm();
  }

  template <typename Fn>
  void fill_channel(Charge eps, Fn&& fn) {
    KernelTensor t(table_, channel_sectors(eps));
    t.fill(std::forward<Fn>(fn));
    set_channel(eps, std::move(t));
  }

  /// Cached ||G_{eps,-eps}||.
  double l2_norm(Charge eps) const { return norms_[idx(eps)]; }
  double recompute_l2_norm(Charge eps) const { return channels_[idx(eps)].l2_norm(); }
  /// sum over channels of ||G_{eps,eps'}||.
  double norm_sum() const { return norms_[0] + norms_[1]; }

  void set_origin(Origin o) { origin_ = o; }
  void set_gaussian_scale(std::optional<double> s) { gaussian_scale_ = s; }

  bool is_zero() const {
    for (const auto& t : channels_) {
      for (const auto& v : t.values()) {
        if (v != Complex{}) return false;
      }
    }
    return true;
  }

 private:
  static std::size_t idx(Charge eps) { return static_cast<std::size_t>(eps); }

  ModeTable table_;
  Origin origin_;
  std::array<KernelTensor, 2> channels_;
  std::array<bool, 2> populated_{};
  std::array<double, 2> norms_{};
  std::optional<double> gaussian_scale_;
};

inline std::string to_string(Kernel::Origin o) {
  switch (o) {
    case Kernel::Origin::Zero: return "zero";
    case Kernel::Origin::Sharp: return "sharp";
    case Kernel::Origin::SmoothGaussian: return "smooth-gaussian";
    case Kernel::Origin::QuarkDecay: return "quark-decay";
    case Kernel::Origin::User: return "user";
    case Kernel::Origin::Cutoff: return "infrared-cutoff";
    case Kernel::Origin::Dilated: return "dilated";
  }
  return "unknown";
}

/// alpha G + beta H on a common mode table.
inline Kernel combine(Complex alpha, const Kernel& g, Complex beta, const Kernel& h) {
  if (!(g.table() == h.table())) throw ConfigError("kernels live on different mode tables");
  Kernel out(g.table(), Kernel::Origin::User);
  for (Charge eps : kChannels) {
    if (!g.populated(eps) && !h.populated(eps)) continue;
    out.fill_channel(eps, [&](const KernelTensor::Index& i) {
      return alpha * g.channel(eps)(i) + beta * h.channel(eps)(i);
    });
  }
  return out;
}

/// chi_Lambda: 1 when every |p_j| <= Lambda, else 0, in both channels.
inline Kernel sharp_cutoff_kernel(const ModeTable& table, double lambda) {
  if (!(lambda > 0.0)) throw DomainError("UV cutoff must be positive");
  Kernel g(table, Kernel::Origin::Sharp);
  for (Charge eps : kChannels) {
    KernelTensor t(table, channel_sectors(eps));
    t.fill([&](const KernelTensor::Index& i) {
      for (std::size_t a = 0; a < 4; ++a) {
        if (t.momentum_norm(a, i[a]) > lambda) return Complex{};
      }
      return Complex{1.0};
    });
    g.set_channel(eps, std::move(t));
  }
  return g;
}

/// Mollified cutoff amplitude * exp(-sum_j |p_j|^2 / Lambda^2), both channels.
inline Kernel smooth_gaussian_kernel(const ModeTable& table, double lambda, Complex amplitude = 1.0) {
  if (!(lambda > 0.0)) throw DomainError("UV cutoff must be positive");
  Kernel g(table, Kernel::Origin::SmoothGaussian);
  for (Charge eps : kChannels) {
    KernelTensor t(table, channel_sectors(eps));
    t.fill([&](const KernelTensor::Index& i) {
      double s = 0.0;
      for (std::size_t a = 0; a < 4; ++a) s += std::pow(t.momentum_norm(a, i[a]), 2);
      return amplitude * std::exp(-s / (lambda * lambda));
    });
    g.set_channel(eps, std::move(t));
  }
  g.set_gaussian_scale(lambda);
  return g;
}

/// Single-channel interaction b*_{1,+} b*_{2,-} b*_{3,+} b_{4,+} with kernel J.
inline Kernel quark_decay_kernel(const ModeTable& table, const KernelTensor& j) {
  const auto expected = channel_sectors(Charge::Plus);
  if (j.sectors() != expected) throw ConfigError("quark-decay kernel must be indexed by (1,+),(2,-),(3,+),(4,+)");
  Kernel g(table, Kernel::Origin::QuarkDecay);
  g.set_channel(Charge::Plus, j);
  return g;
}

/// Quark-decay kernel with a Gaussian profile J.
inline Kernel quark_decay_gaussian(const ModeTable& table, double lambda, Complex amplitude = 1.0) {
  KernelTensor j(table, channel_sectors(Charge::Plus));
  j.fill([&](const KernelTensor::Index& i) {
    double s = 0.0;
    for (std::size_t a = 0; a < 4; ++a) s += std::pow(j.momentum_norm(a, i[a]), 2);
    return amplitude * std::exp(-s / (lambda * lambda));
  });
  Kernel g = quark_decay_kernel(table, j);
  g.set_gaussian_scale(lambda);
  return g;
}

/// G^sigma: zero every entry with |p_2| < sigma or |p_3| < sigma.
inline Kernel infrared_cutoff(const Kernel& g, double sigma) {
  if (!(sigma >= 0.0)) throw DomainError("infrared cutoff must be non-negative");
  Kernel out = g;
  bool changed = false;
  for (Charge eps : g.populated_channels()) {
    KernelTensor t = g.channel(eps);
    for (std::size_t f = 0; f < t.size(); ++f) {
      const auto i = t.unflat(f);
      if (t.momentum_norm(1, i[1]) < sigma || t.momentum_norm(2, i[2]) < sigma) {
        if (t.at_flat(f) != Complex{}) changed = true;
        t.at_flat(f) = Complex{};
      }
    }
    out.set_channel(eps, std::move(t));
  }
  if (changed) {
    if (g.origin() != Kernel::Origin::Sharp) out.set_origin(Kernel::Origin::Cutoff);
    out.set_gaussian_scale(std::nullopt);
  }
  return out;
}

/// sum_{eps} sum_{tuples with sum |p_j|^2 <= 1} w |G|^2 (1/|p_2|^2 + 1/|p_3|^2).
inline double infrared_diagnostic(const Kernel& g) {
  double acc = 0.0;
  for (Charge eps : g.populated_channels()) {
    const KernelTensor& t = g.channel(eps);
    for (std::size_t f = 0; f < t.size(); ++f) {
      const double v = std::norm(t.at_flat(f));
      if (v == 0.0) continue;
      const auto i = t.unflat(f);
      double r2 = 0.0;
      for (std::size_t a = 0; a < 4; ++a) r2 += std::pow(t.momentum_norm(a, i[a]), 2);
      if (r2 > 1.0) continue;
      const double p2 = t.momentum_norm(1, i[1]);
      const double p3 = t.momentum_norm(2, i[2]);
      acc += t.weight(i) * v * (1.0 / (p2 * p2) + 1.0 / (p3 * p3));
    }
  }
  return acc;
}

/// sum_{eps} sum_{tuples} w |G|^2 / |p_j|^2 for neutrino species j in {2, 3}:
/// the weighted kernel integral that controls the neutrino number.
inline double infrared_weighted_norm(const Kernel& g, int species) {
  if (species != 2 && species != 3) throw DomainError("infrared weight is defined for species 2 and 3");
  const std::size_t axis = static_cast<std::size_t>(species - 1);
  double acc = 0.0;
  for (Charge eps : g.populated_channels()) {
    const KernelTensor& t = g.channel(eps);
    for (std::size_t f = 0; f < t.size(); ++f) {
      const double v = std::norm(t.at_flat(f));
      if (v == 0.0) continue;
      const auto i = t.unflat(f);
      const double p = t.momentum_norm(axis, i[axis]);
      acc += t.weight(i) * v / (p * p);
    }
  }
  return acc;
}

/// ||G - H|| summed over channels.
inline double difference_norm_sum(const Kernel& g, const Kernel& h) {
  double total = 0.0;
  for (Charge eps : kChannels) {
    const KernelTensor& a = g.channel(eps);
    const KernelTensor& b = h.channel(eps);
    double acc = 0.0;
    for (std::size_t f = 0; f < a.size(); ++f) acc += a.weight(a.unflat(f)) * std::norm(a.at_flat(f) - b.at_flat(f));
    total += std::sqrt(acc);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Dilation derivatives.
//
// The one-particle dilation generator is a = (p.grad + grad.p)/2 = p.grad + 3/2,
// the normalization under which [A, H0] has symbol p.grad(omega). On a grid the
// radial derivative r d/dr needs neighbouring nodes on the same ray.

/// Radial finite-difference stencils for the modes of one sector.
class RadialStencil {
 public:
  explicit RadialStencil(std::span<const Mode> modes) : n_(modes.size()) {
    d1_.assign(n_, {});
    d2_.assign(n_, {});
    std::vector<bool> done(n_, false);
    for (std::size_t i = 0; i < n_; ++i) {
      if (done[i]) continue;
      std::vector<std::size_t> ray{i};
      for (std::size_t j = i + 1; j < n_; ++j) {
        if (!done[j] && same_ray(modes[i], modes[j])) ray.push_back(j);
      }
      for (auto j : ray) done[j] = true;
      std::sort(ray.begin(), ray.end(),
                [&](std::size_t a, std::size_t b) { return modes[a].momentum_norm() < modes[b].momentum_norm(); });
      if (ray.size() < 2) {
        throw NonDifferentiableKernelError("mode " + std::to_string(i) + " of sector " + to_string(modes[i].sector) +
                                           " has no radial neighbour; finite-difference dilation needs rays of >= 2 nodes");
      }
      build_ray(modes, ray);
    }
  }

  /// (d/dr f)(i) = sum_l d1(i)[l] f(l)
  const std::vector<std::pair<std::size_t, double>>& first(std::size_t i) const { return d1_[i]; }
  const std::vector<std::pair<std::size_t, double>>& second(std::size_t i) const { return d2_[i]; }

 private:
  static bool same_ray(const Mode& a, const Mode& b) {
    if (a.spin != b.spin) return false;
    const double ra = a.momentum_norm();
    const double rb = b.momentum_norm();
    for (int c = 0; c < 3; ++c) {
      if (std::abs(a.momentum[c] / ra - b.momentum[c] / rb) > 1e-9) return false;
    }
    return true;
  }

  void build_ray(std::span<const Mode> modes, const std::vector<std::size_t>& ray) {
    const std::size_t m = ray.size();
    auto r = [&](std::size_t k) { return modes[ray[k]].momentum_norm(); };
    if (m == 2) {
      const double h = r(1) - r(0);
      for (std::size_t k = 0; k < 2; ++k) d1_[ray[k]] = {{ray[0], -1.0 / h}, {ray[1], 1.0 / h}};
      return;
    }
    for (std::size_t k = 0; k < m; ++k) {
      // Three-point Lagrange stencil: centered inside, one-sided at the ends.
      const std::size_t c = std::clamp<std::size_t>(k, 1, m - 2);
      const std::size_t a = c - 1, b = c + 1;
      const double x = r(k), x0 = r(a), x1 = r(c), x2 = r(b);
      const double l0 = ((x - x1) + (x - x2)) / ((x0 - x1) * (x0 - x2));
      const double l1 = ((x - x0) + (x - x2)) / ((x1 - x0) * (x1 - x2));
      const double l2 = ((x - x0) + (x - x1)) / ((x2 - x0) * (x2 - x1));
      d1_[ray[k]] = {{ray[a], l0}, {ray[c], l1}, {ray[b], l2}};
      d2_[ray[k]] = {{ray[a], 2.0 / ((x0 - x1) * (x0 - x2))},
                     {ray[c], 2.0 / ((x1 - x0) * (x1 - x2))},
                     {ray[b], 2.0 / ((x2 - x0) * (x2 - x1))}};
    }
  }

  std::size_t n_;
  std::vector<std::vector<std::pair<std::size_t, double>>> d1_;
  std::vector<std::vector<std::pair<std::size_t, double>>> d2_;
};

namespace detail {

inline void reject_non_differentiable(const Kernel& g) {
  if (g.origin() == Kernel::Origin::Sharp) {
    throw NonDifferentiableKernelError("the sharp cutoff kernel has no square-integrable dilation derivative");
  }
  if (g.origin() == Kernel::Origin::Cutoff) {
    throw NonDifferentiableKernelError("an infrared-cut kernel is discontinuous at |p| = sigma");
  }
}

// r d/dr along one axis of a channel tensor, by finite differences.
inline KernelTensor radial_derivative_fd(const KernelTensor& t, std::size_t axis, const RadialStencil& st) {
  KernelTensor out = t;
  for (std::size_t f = 0; f < t.size(); ++f) {
    auto i = t.unflat(f);
    const std::size_t at = i[axis];
    Complex d{};
    for (const auto& [l, c] : st.first(at)) {
      i[axis] = l;
      d += c * t(i);
    }
    out.at_flat(f) = t.momentum_norm(axis, at) * d;
  }
  return out;
}

}  // namespace detail

/// Sum over the four particles of a_j G, with a_j = p_j.grad_{p_j} + 3/2.
/// Analytic for Gaussian presets, finite differences along radial rays of the
/// grid otherwise; sharp and infrared-cut kernels are refused.
inline Kernel dilation_kernel(const Kernel& g) {
  detail::reject_non_differentiable(g);
  Kernel out(g.table(), Kernel::Origin::Dilated);
  if (auto s = g.gaussian_scale()) {
    const double s2 = (*s) * (*s);
    for (Charge eps : g.populated_channels()) {
      const KernelTensor& t = g.channel(eps);
      out.fill_channel(eps, [&](const KernelTensor::Index& i) {
        double factor = 0.0;
        for (std::size_t a = 0; a < 4; ++a) factor += 1.5 - 2.0 * std::pow(t.momentum_norm(a, i[a]), 2) / s2;
        return factor * t(i);
      });
    }
    return out;
  }
  for (Charge eps : g.populated_channels()) {
    const KernelTensor& t = g.channel(eps);
    KernelTensor acc = t;
    for (std::size_t f = 0; f < acc.size(); ++f) acc.at_flat(f) = 6.0 * t.at_flat(f);  // 4 x 3/2
    for (std::size_t a = 0; a < 4; ++a) {
      RadialStencil st(g.table().sector_modes(t.sectors()[a]));
      KernelTensor d = detail::radial_derivative_fd(t, a, st);
      for (std::size_t f = 0; f < acc.size(); ++f) acc.at_flat(f) += d.at_flat(f);
    }
    out.set_channel(eps, std::move(acc));
  }
  return out;
}

/// Discrete L^2 norms of p_j.grad_j G and of p_j^2 Delta_j G (radial part),
/// summed over channels, for each particle j = 1..4.
struct KernelRegularity {
  std::array<double, 4> dilation_norm{};
  std::array<double, 4> laplacian_norm{};

  bool finite() const {
    for (std::size_t a = 0; a < 4; ++a) {
      if (!std::isfinite(dilation_norm[a]) || !std::isfinite(laplacian_norm[a])) return false;
    }
    return true;
  }
};

inline KernelRegularity kernel_regularity(const Kernel& g) {
  detail::reject_non_differentiable(g);
  KernelRegularity reg;
  for (Charge eps : g.populated_channels()) {
    const KernelTensor& t = g.channel(eps);
    for (std::size_t a = 0; a < 4; ++a) {
      double acc1 = 0.0, acc2 = 0.0;
      if (auto s = g.gaussian_scale()) {
        const double s2 = (*s) * (*s);
        for (std::size_t f = 0; f < t.size(); ++f) {
          const auto i = t.unflat(f);
          const double r2 = std::pow(t.momentum_norm(a, i[a]), 2);
          const double w = t.weight(i);
          acc1 += w * std::norm(-2.0 * r2 / s2 * t.at_flat(f));
          acc2 += w * std::norm(r2 * (4.0 * r2 / (s2 * s2) - 6.0 / s2) * t.at_flat(f));
        }
      } else {
        RadialStencil st(g.table().sector_modes(t.sectors()[a]));
        for (std::size_t f = 0; f < t.size(); ++f) {
          auto i = t.unflat(f);
          const std::size_t at = i[a];
          const double r = t.momentum_norm(a, at);
          Complex d1{}, d2{};
          for (const auto& [l, c] : st.first(at)) {
            i[a] = l;
            d1 += c * t(i);
          }
          for (const auto& [l, c] : st.second(at)) {
            i[a] = l;
            d2 += c * t(i);
          }
          i[a] = at;
          const double w = t.weight(i);
          acc1 += w * std::norm(r * d1);
          acc2 += w * std::norm(r * r * (d2 + 2.0 / r * d1));
        }
      }
      reg.dilation_norm[a] += std::sqrt(acc1);
      reg.laplacian_norm[a] += std::sqrt(acc2);
    }
  }
  return reg;
}

}  // namespace fermiweak
