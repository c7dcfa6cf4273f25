#pragma once

// Seeded generators for random finite models and games, shared by the test
// suite, the acceptance checks and `hmmcd verify`.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "hmmcd/discrete_model.hpp"
#include "hmmcd/finite_game.hpp"
#include "hmmcd/random.hpp"

namespace hmmcd {

inline std::vector<double> random_distribution(Stream& gen, std::size_t n, double floor = 0.05) {
  std::vector<double> v(n);
  double s = 0.0;
  for (double& x : v) {
    x = floor + gen.uniform();
    s += x;
  }
  for (double& x : v) x /= s;
  return v;
}

/// Random model with strictly positive entries. With `same_kernel` the
/// post-change transition equals the nominal one.
inline DiscreteModel random_discrete_model(std::uint64_t seed, std::size_t states, std::size_t symbols,
                                           bool same_kernel = true) {
  Stream gen = rng_stream(seed, 0xd15c);
  DiscreteModel m;
  m.pre_obs = random_distribution(gen, symbols);
  for (std::size_t z = 0; z < states; ++z) {
    m.post_obs.push_back(random_distribution(gen, symbols));
    m.pre_trans.push_back(random_distribution(gen, states));
  }
  if (same_kernel) {
    m.post_trans = m.pre_trans;
  } else {
    for (std::size_t z = 0; z < states; ++z) m.post_trans.push_back(random_distribution(gen, states));
  }
  m.stationary = stationary_by_power_iteration(m.pre_trans);
  return m;
}

/// Random game on a small model. The detector is a random deterministic rule
/// of the whole xi-history (or a random hazard when `randomized`).
inline FiniteGame random_game(std::uint64_t seed, InfoModel info, GameMode mode, bool randomized = false) {
  Stream gen = rng_stream(seed, 0x9a3e);
  // With (z, xi) visible the w alphabet is |Z| |Xi|; keep it at 4 so the
  // stopping rules stay enumerable.
  const bool small = info == InfoModel::both;
  const std::size_t states = 2 + (small ? 0 : gen.next() % 2);
  const std::size_t symbols = 2 + (small ? 0 : gen.next() % 2);
  FiniteGame g;
  g.model = random_discrete_model(seed, states, symbols, gen.next() % 2 == 0);
  g.info = info;
  g.mode = mode;
  g.reward = mode == GameMode::inf ? one_step_reward() : delay_reward();
  g.horizon = 3;
  const std::uint64_t salt = gen.next();
  g.detector = [salt, randomized](std::span<const std::size_t> xi) {
    std::uint64_t h = salt;
    for (std::size_t x : xi) h = (h ^ (x + 1)) * 0x100000001b3ull;
    h ^= h >> 29;
    h *= 0xbf58476d1ce4e5b9ull;
    h ^= h >> 32;
    if (randomized) return static_cast<double>(h % 1000) / 999.0;
    return (h % 3 == 0) ? 1.0 : 0.0;
  };
  return g;
}

}  // namespace hmmcd
