#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace plasmaviz {

struct ParticleFrame {
  std::vector<std::array<float, 3>> positions;
  std::vector<float> scalar;  // energy or whatever quantity was imported

  std::size_t size() const noexcept { return positions.size(); }
  // Throws Error(validation) on length mismatch or non-finite values.
  void validate() const;
  friend bool operator==(const ParticleFrame&, const ParticleFrame&) = default;
};

inline constexpr std::uint32_t kDefaultTextureResolution = 512;

// R x R texels of (x, y, z, scalar) float32, texel index = i + R*j.
// Texels at or past `occupancy` hold NaN in all four channels.
struct ParticleTexture {
  std::uint32_t resolution = 0;
  std::uint32_t occupancy = 0;
  std::vector<float> texels;  // 4 * R * R, interleaved per texel

  std::size_t capacity() const noexcept { return static_cast<std::size_t>(resolution) * resolution; }
};

// Keeps each particle independently with probability `fraction`, drawing
// from a seeded 64-bit Mersenne Twister. Order is preserved.
ParticleFrame subsample(const ParticleFrame& frame, double fraction, std::uint64_t rng_seed);

// Particle i lands in texel (i mod R, i div R). Throws
// Error(capacity_exceeded) when frame.size() > R*R.
ParticleTexture encode_texture(const ParticleFrame& frame, std::uint32_t resolution = kDefaultTextureResolution);

ParticleFrame decode_texture(const ParticleTexture& texture);

}  // namespace plasmaviz
