#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace lcsm {

/// Worker count from LCSM_THREADS, else the hardware concurrency.
inline int default_workers() {
  if (const char* env = std::getenv("LCSM_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(i) for i in [0, n) split into contiguous blocks, one per worker.
/// If any call throws, the exception from the lowest block index is rethrown
/// after all workers finish.
template <typename Body>
void parallel_for(std::size_t n, int workers, Body&& body) {
  const std::size_t w = std::min<std::size_t>(std::max(1, workers), n);
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(w);
  auto run_block = [&](std::size_t block) {
    const std::size_t begin = n * block / w;
    const std::size_t end = n * (block + 1) / w;
    try {
      for (std::size_t i = begin; i < end; ++i) body(i);
    } catch (...) {
      errors[block] = std::current_exception();
    }
  };
  {
    std::vector<std::jthread> threads;
    threads.reserve(w - 1);
    for (std::size_t block = 1; block < w; ++block) threads.emplace_back(run_block, block);
    run_block(0);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Pairwise summation with a fixed tree shape, so the result depends only on
/// the values and their order.
inline double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

}  // namespace lcsm
