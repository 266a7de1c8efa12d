#pragma once

// Single-elimination pairwise tournament with K repeated, order-swapped
// comparisons per match.

#include <algorithm>
#include <bit>
#include <numeric>
#include <vector>

#include "tbon/core.hpp"

namespace tbon {

/// One match between entrants a and b. `prefers_first(x, y, rng)` returns true
/// when the judge prefers the item shown first. Even repeats show (a, b), odd
/// repeats show (b, a). A majority tie is settled by a fair coin.
template <class Judge>
std::size_t play_match(std::size_t a, std::size_t b, Judge& prefers_first,
                       int repeats, Rng& rng) {
  int wins_a = 0;
  for (int r = 0; r < repeats; ++r) {
    if (r % 2 == 0) {
      if (prefers_first(a, b, rng)) ++wins_a;
    } else {
      if (!prefers_first(b, a, rng)) ++wins_a;
    }
  }
  const int wins_b = repeats - wins_a;
  if (wins_a > wins_b) return a;
  if (wins_b > wins_a) return b;
  return std::bernoulli_distribution(0.5)(rng) ? a : b;
}

/// Runs the bracket given by `order`. When the entrant count is not a power of
/// two, the first (P - n) entrants of `order` receive byes in round one, where
/// P is the next power of two.
template <class Judge>
std::size_t run_bracket(std::vector<std::size_t> order, Judge& prefers_first,
                        int repeats, Rng& rng) {
  require(!order.empty(), "tournament: no entrants");
  require(repeats >= 2 && repeats % 2 == 0,
          "tournament: repeats must be a positive even number");
  const std::size_t n = order.size();
  const std::size_t full = std::bit_ceil(n);
  const std::size_t byes = full - n;

  std::vector<std::size_t> round;
  round.reserve(full / 2);
  round.insert(round.end(), order.begin(),
               order.begin() + static_cast<std::ptrdiff_t>(byes));
  for (std::size_t i = byes; i + 1 < n; i += 2)
    round.push_back(play_match(order[i], order[i + 1], prefers_first, repeats, rng));
  if (n == 1) round = order;

  while (round.size() > 1) {
    std::vector<std::size_t> next;
    next.reserve(round.size() / 2);
    for (std::size_t i = 0; i + 1 < round.size(); i += 2)
      next.push_back(play_match(round[i], round[i + 1], prefers_first, repeats, rng));
    round = std::move(next);
  }
  return round.front();
}

/// Randomly permutes the n entrants into a bracket and returns the winner.
template <class Judge>
std::size_t run_tournament(std::size_t n, Judge& prefers_first, int repeats,
                           Rng& rng) {
  require(n >= 1, "tournament: no entrants");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  return run_bracket(std::move(order), prefers_first, repeats, rng);
}

}  // namespace tbon
