#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <string_view>

namespace pacfl {

using Rng = std::mt19937_64;

// Counter-based seed derivation. A child seed depends only on the parent seed
// and the path of integer keys, so adding trials or clients never shifts the
// streams of existing ones.
std::uint64_t derive_seed(std::uint64_t parent,
                          std::initializer_list<std::uint64_t> path);

// Stable 64-bit key for a stream label.
std::uint64_t stream_key(std::string_view label);

inline Rng make_rng(std::uint64_t parent,
                    std::initializer_list<std::uint64_t> path) {
  return Rng(derive_seed(parent, path));
}

// Worker count from PACFL_THREADS, else hardware concurrency (at least 1).
int default_thread_count();

// Runs body(i) for i in [0, n) on up to `threads` workers. Each index must
// write only its own output slot; callers collate by index afterwards.
void parallel_for(int n, int threads, const std::function<void(int)>& body);

}  // namespace pacfl
