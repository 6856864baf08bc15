// Copyright 2026 The ppgpr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Symmetric residue ring Z_q = Z ∩ [-q/2, q/2) and additive secret sharing.
//
// Headroom guarantee: q ≤ 2^62, so every reduced entry satisfies
// |v| ≤ 2^61 and the sum or difference of two reduced entries fits in a
// signed 64-bit word. Anything longer (sums over many terms, products with
// integer weights) is accumulated in checked 128-bit arithmetic and reduced
// once. An overflow there is an internal error, never a silent wrap.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ppgpr {

using Int128 = __int128;

namespace detail {

inline Int128 checked_add(Int128 a, Int128 b) {
  Int128 r;
  if (__builtin_add_overflow(a, b, &r)) {
    throw std::overflow_error("ppgpr: 128-bit accumulator overflow");
  }
  return r;
}

inline Int128 checked_mul(Int128 a, Int128 b) {
  Int128 r;
  if (__builtin_mul_overflow(a, b, &r)) {
    throw std::overflow_error("ppgpr: 128-bit product overflow");
  }
  return r;
}

}  // namespace detail

/// Protocol-wide modulus q with 3 ≤ q ≤ 2^62.
class Modulus {
 public:
  static constexpr std::int64_t kMax = std::int64_t{1} << 62;

  explicit Modulus(std::int64_t q) : q_(q) {
    if (q < 3 || q > kMax) {
      throw std::invalid_argument("modulus must satisfy 3 <= q <= 2^62, got " +
                                  std::to_string(q));
    }
  }

  std::int64_t value() const { return q_; }
  /// Smallest representative, ⌈-q/2⌉.
  std::int64_t lower() const { return -(q_ / 2); }
  /// Largest representative (inclusive).
  std::int64_t upper() const { return q_ - 1 + lower(); }

  bool contains(std::int64_t v) const { return v >= lower() && v <= upper(); }

  /// a mod q into [-q/2, q/2).
  std::int64_t reduce(Int128 a) const {
    Int128 r = a % q_;  // truncated, |r| < q
    if (r < lower()) r += q_;
    if (r > upper()) r -= q_;
    return static_cast<std::int64_t>(r);
  }

  friend bool operator==(Modulus, Modulus) = default;

 private:
  std::int64_t q_;
};

/// Element of Z_q^p.
class RingVector {
 public:
  RingVector(Modulus q, std::size_t length) : q_(q), entries_(length, 0) {}

  /// Takes entries that are already reduced; throws if any is out of range.
  RingVector(Modulus q, std::vector<std::int64_t> entries)
      : q_(q), entries_(std::move(entries)) {
    for (std::int64_t v : entries_) {
      if (!q_.contains(v)) {
        throw std::invalid_argument("ring entry " + std::to_string(v) +
                                    " outside [-q/2, q/2) for q=" +
                                    std::to_string(q_.value()));
      }
    }
  }

  Modulus modulus() const { return q_; }
  std::size_t size() const { return entries_.size(); }
  std::span<const std::int64_t> entries() const { return entries_; }
  std::int64_t operator[](std::size_t k) const { return entries_[k]; }

  bool is_zero() const {
    for (std::int64_t v : entries_) {
      if (v != 0) return false;
    }
    return true;
  }

  friend bool operator==(const RingVector&, const RingVector&) = default;

 private:
  friend class RingAccumulator;
  Modulus q_;
  std::vector<std::int64_t> entries_;
};

/// Componentwise exact sum of ring vectors and scaled integer vectors,
/// reduced once at the end.
class RingAccumulator {
 public:
  RingAccumulator(Modulus q, std::size_t length) : q_(q), acc_(length, 0) {}

  RingAccumulator& add(const RingVector& v, std::int64_t coefficient = 1) {
    check(v);
    for (std::size_t k = 0; k < acc_.size(); ++k) {
      acc_[k] = detail::checked_add(
          acc_[k], detail::checked_mul(coefficient, v.entries_[k]));
    }
    return *this;
  }

  RingAccumulator& add_integers(std::span<const std::int64_t> v,
                                std::int64_t coefficient = 1) {
    if (v.size() != acc_.size()) {
      throw std::invalid_argument("length mismatch in ring accumulation");
    }
    for (std::size_t k = 0; k < acc_.size(); ++k) {
      acc_[k] = detail::checked_add(acc_[k],
                                    detail::checked_mul(coefficient, v[k]));
    }
    return *this;
  }

  RingVector reduced() const {
    RingVector out(q_, acc_.size());
    for (std::size_t k = 0; k < acc_.size(); ++k) {
      out.entries_[k] = q_.reduce(acc_[k]);
    }
    return out;
  }

 private:
  void check(const RingVector& v) const {
    if (v.modulus() != q_ || v.size() != acc_.size()) {
      throw std::invalid_argument("modulus or length mismatch in ring sum");
    }
  }

  Modulus q_;
  std::vector<Int128> acc_;
};

inline RingVector reduce_mod(std::span<const std::int64_t> a, Modulus q) {
  return RingAccumulator(q, a.size()).add_integers(a).reduced();
}

inline RingVector ring_add(const RingVector& a, const RingVector& b) {
  return RingAccumulator(a.modulus(), a.size()).add(a).add(b).reduced();
}

inline RingVector ring_sub(const RingVector& a, const RingVector& b) {
  return RingAccumulator(a.modulus(), a.size()).add(a).add(b, -1).reduced();
}

inline RingVector ring_scale(std::int64_t c, const RingVector& a) {
  return RingAccumulator(a.modulus(), a.size()).add(a, c).reduced();
}

inline RingVector operator+(const RingVector& a, const RingVector& b) {
  return ring_add(a, b);
}
inline RingVector operator-(const RingVector& a, const RingVector& b) {
  return ring_sub(a, b);
}

/// Uniform draw from Z_q by rejection sampling (no modulo bias).
template <class Urbg>
std::int64_t sample_residue(Modulus q, Urbg& rng) {
  static_assert(Urbg::min() == 0 &&
                Urbg::max() == std::numeric_limits<std::uint64_t>::max());
  const auto span = static_cast<std::uint64_t>(q.value());
  // 2^64 mod q; the accepted range [threshold, 2^64) is a multiple of q.
  const std::uint64_t threshold = (std::uint64_t{0} - span) % span;
  std::uint64_t x;
  do {
    x = rng();
  } while (x < threshold);
  return static_cast<std::int64_t>(x % span) + q.lower();
}

template <class Urbg>
RingVector sample_uniform(Modulus q, std::size_t length, Urbg& rng) {
  std::vector<std::int64_t> entries(length);
  for (auto& e : entries) e = sample_residue(q, rng);
  return RingVector(q, std::move(entries));
}

/// n additive shares of one message.
struct ShareBundle {
  std::vector<RingVector> shares;

  std::size_t count() const { return shares.size(); }
};

/// Share(m, n): first n-1 shares uniform, last closes the sum to m.
template <class Urbg>
ShareBundle share(const RingVector& message, std::size_t n, Urbg& rng) {
  if (n == 0) {
    throw std::invalid_argument("share count must be at least 1");
  }
  ShareBundle bundle;
  bundle.shares.reserve(n);
  RingAccumulator last(message.modulus(), message.size());
  last.add(message);
  for (std::size_t s = 0; s + 1 < n; ++s) {
    bundle.shares.push_back(
        sample_uniform(message.modulus(), message.size(), rng));
    last.add(bundle.shares.back(), -1);
  }
  bundle.shares.push_back(last.reduced());
  return bundle;
}

inline RingVector reconstruct(const ShareBundle& bundle) {
  if (bundle.shares.empty()) {
    throw std::invalid_argument("cannot reconstruct from zero shares");
  }
  const RingVector& first = bundle.shares.front();
  RingAccumulator acc(first.modulus(), first.size());
  for (const auto& s : bundle.shares) acc.add(s);
  return acc.reduced();
}

}  // namespace ppgpr
