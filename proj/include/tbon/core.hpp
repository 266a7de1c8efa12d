#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace tbon {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Random stream used throughout the library. Every randomized operation takes
/// one by reference; streams are never shared between concurrent callers.
using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent sub-stream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed for the sub-stream identified by (master, a, b). Results of Monte Carlo
/// trials keyed this way do not depend on execution order.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                    std::uint64_t b = 0) noexcept {
  return mix64(mix64(mix64(master) ^ (a + 0x632be59bd9b4e019ULL)) ^
               (b + 0x85157af5b2c4d0a1ULL));
}

inline Rng derive_stream(std::uint64_t master, std::uint64_t a,
                         std::uint64_t b = 0) {
  return Rng(derive_seed(master, a, b));
}

inline double standard_normal(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

/// Direction on the unit sphere. Construction normalizes nothing: the norm
/// must already be within 1e-12 of one.
class UnitDirection {
 public:
  static constexpr double kNormTolerance = 1e-12;

  explicit UnitDirection(Vector coords) : coords_(std::move(coords)) {
    require(coords_.size() >= 1, "UnitDirection: empty vector");
    require(std::abs(coords_.norm() - 1.0) <= kNormTolerance,
            "UnitDirection: norm differs from 1");
  }

  /// Normalizes v; throws on a zero or non-finite vector.
  static UnitDirection normalized(const Vector& v) {
    const double n = v.norm();
    require(std::isfinite(n) && n > 0.0, "UnitDirection: cannot normalize");
    Vector u = v / n;
    // one refinement pass keeps the norm within tolerance for large d
    u /= u.norm();
    return UnitDirection(std::move(u));
  }

  const Vector& coords() const noexcept { return coords_; }
  Eigen::Index dim() const noexcept { return coords_.size(); }
  double dot(const Vector& v) const { return coords_.dot(v); }

 private:
  Vector coords_;
};

/// Axis-aligned box, lower <= upper componentwise.
struct Box {
  Vector lower;
  Vector upper;

  Box() = default;
  Box(Vector lo, Vector hi) : lower(std::move(lo)), upper(std::move(hi)) {
    require(lower.size() == upper.size() && lower.size() >= 1,
            "Box: bound dimension mismatch");
    require((upper.array() > lower.array()).all(), "Box: degenerate bounds");
  }

  Eigen::Index dim() const noexcept { return lower.size(); }
  double diagonal() const { return (upper - lower).norm(); }
  Vector project(const Vector& x) const {
    return x.cwiseMax(lower).cwiseMin(upper);
  }
  bool contains(const Vector& x) const {
    return (x.array() >= lower.array()).all() &&
           (x.array() <= upper.array()).all();
  }
  Vector sample(Rng& rng) const {
    Vector x(dim());
    for (Eigen::Index i = 0; i < dim(); ++i)
      x[i] = lower[i] + (upper[i] - lower[i]) * uniform01(rng);
    return x;
  }
};

}  // namespace tbon
