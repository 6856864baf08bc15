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

#include <sodium.h>

#include <array>
#include <cstdint>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <string_view>

namespace ppgpr {

namespace detail {

inline void ensure_sodium() {
  static const int status = sodium_init();
  if (status < 0) {
    throw std::runtime_error("libsodium initialisation failed");
  }
}

}  // namespace detail

/// ChaCha20 keystream exposed as a UniformRandomBitGenerator.
///
/// This is the randomness source for every share and mask. The default
/// factory keys it from operating-system entropy; `from_seed` derives the key
/// from a 64-bit seed and a stream label so simulations can be replayed.
/// Instances are move-only in spirit: copying duplicates the stream, which is
/// only ever wanted in tests.
class ShareRng {
 public:
  using result_type = std::uint64_t;

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  static ShareRng from_os_entropy() {
    detail::ensure_sodium();
    ShareRng rng;
    randombytes_buf(rng.key_.data(), rng.key_.size());
    return rng;
  }

  /// Deterministic stream: key = BLAKE2b("ppgpr/share-rng" | seed | stream).
  static ShareRng from_seed(std::uint64_t seed, std::uint64_t stream = 0) {
    detail::ensure_sodium();
    ShareRng rng;
    constexpr std::string_view kLabel = "ppgpr/share-rng";
    std::array<unsigned char, kLabel.size() + 16> material{};
    std::memcpy(material.data(), kLabel.data(), kLabel.size());
    for (int b = 0; b < 8; ++b) {
      material[kLabel.size() + b] = static_cast<unsigned char>(seed >> (8 * b));
      material[kLabel.size() + 8 + b] =
          static_cast<unsigned char>(stream >> (8 * b));
    }
    crypto_generichash(rng.key_.data(), rng.key_.size(), material.data(),
                       material.size(), nullptr, 0);
    return rng;
  }

  result_type operator()() {
    if (cursor_ == kWords) refill();
    return buffer_[cursor_++];
  }

 private:
  static constexpr std::size_t kWords = 64;  // 8 ChaCha20 blocks per refill

  ShareRng() = default;

  void refill() {
    std::array<unsigned char, kWords * 8> bytes{};
    crypto_stream_chacha20_xor_ic(bytes.data(), bytes.data(), bytes.size(),
                                  nonce_.data(), block_counter_, key_.data());
    block_counter_ += bytes.size() / 64;
    for (std::size_t w = 0; w < kWords; ++w) {
      std::uint64_t v = 0;
      for (int b = 0; b < 8; ++b) {
        v |= static_cast<std::uint64_t>(bytes[w * 8 + b]) << (8 * b);
      }
      buffer_[w] = v;
    }
    cursor_ = 0;
  }

  std::array<unsigned char, crypto_stream_chacha20_KEYBYTES> key_{};
  std::array<unsigned char, crypto_stream_chacha20_NONCEBYTES> nonce_{};
  std::uint64_t block_counter_ = 0;
  std::array<std::uint64_t, kWords> buffer_{};
  std::size_t cursor_ = kWords;
};

}  // namespace ppgpr
