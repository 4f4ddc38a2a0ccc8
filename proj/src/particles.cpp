#include "plasmaviz/particles.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "plasmaviz/error.hpp"

namespace plasmaviz {

void ParticleFrame::validate() const {
  if (positions.size() != scalar.size())
    throw Error(ErrorCode::validation, "particle frame has " + std::to_string(positions.size()) + " positions but " +
                                           std::to_string(scalar.size()) + " scalars");
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const auto& p = positions[i];
    if (!std::isfinite(p[0]) || !std::isfinite(p[1]) || !std::isfinite(p[2]) || !std::isfinite(scalar[i]))
      throw Error(ErrorCode::bad_value, "particle " + std::to_string(i) + " holds a non-finite value");
  }
}

ParticleFrame subsample(const ParticleFrame& frame, double fraction, std::uint64_t rng_seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw Error(ErrorCode::invalid_argument, "fraction must lie in [0, 1], got " + std::to_string(fraction));
  ParticleFrame out;
  if (fraction == 0.0) return out;
  if (fraction == 1.0) return frame;

  // Uniform [0,1) from the top 53 bits; avoids implementation-defined distributions.
  std::mt19937_64 rng(rng_seed);
  const auto expected = static_cast<std::size_t>(fraction * static_cast<double>(frame.size()) * 1.01) + 16;
  out.positions.reserve(expected);
  out.scalar.reserve(expected);
  for (std::size_t i = 0; i < frame.size(); ++i) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    if (u < fraction) {
      out.positions.push_back(frame.positions[i]);
      out.scalar.push_back(frame.scalar[i]);
    }
  }
  return out;
}

ParticleTexture encode_texture(const ParticleFrame& frame, std::uint32_t resolution) {
  if (resolution == 0) throw Error(ErrorCode::invalid_argument, "texture resolution must be positive");
  if (frame.positions.size() != frame.scalar.size())
    throw Error(ErrorCode::validation, "particle frame positions and scalars differ in length");
  ParticleTexture tex;
  tex.resolution = resolution;
  const std::size_t capacity = tex.capacity();
  if (frame.size() > capacity)
    throw Error(ErrorCode::capacity_exceeded, "frame holds " + std::to_string(frame.size()) +
                                                  " particles but a " + std::to_string(resolution) + "x" +
                                                  std::to_string(resolution) + " texture fits " +
                                                  std::to_string(capacity));
  tex.occupancy = static_cast<std::uint32_t>(frame.size());
  tex.texels.assign(4 * capacity, std::numeric_limits<float>::quiet_NaN());
  for (std::size_t i = 0; i < frame.size(); ++i) {
    float* t = &tex.texels[4 * i];
    t[0] = frame.positions[i][0];
    t[1] = frame.positions[i][1];
    t[2] = frame.positions[i][2];
    t[3] = frame.scalar[i];
  }
  return tex;
}

ParticleFrame decode_texture(const ParticleTexture& texture) {
  if (texture.occupancy > texture.capacity() || texture.texels.size() != 4 * texture.capacity())
    throw Error(ErrorCode::validation, "texture occupancy or payload disagrees with its resolution");
  ParticleFrame out;
  out.positions.resize(texture.occupancy);
  out.scalar.resize(texture.occupancy);
  for (std::size_t i = 0; i < texture.occupancy; ++i) {
    const float* t = &texture.texels[4 * i];
    out.positions[i] = {t[0], t[1], t[2]};
    out.scalar[i] = t[3];
  }
  return out;
}

}  // namespace plasmaviz
