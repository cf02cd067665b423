// Split-search benchmark: OpenMP kernel against the serial reference on a
// wide, short matrix shaped like the cohort (few cases, many features).

#include <chrono>
#include <cstdio>
#include <random>
#include <vector>

#include <CLI11.hpp>

#include "flowcll/models/split_search.hpp"
#include "flowcll/models/training_set.hpp"
#include "flowcll/parallel.hpp"

using namespace flowcll;
using namespace flowcll::models;

namespace {

struct Problem {
  std::vector<std::vector<float>> storage;
  TrainingSet set;
  std::vector<std::int64_t> grad, hess;
  std::vector<std::int32_t> slot;
  std::vector<GradientSums> totals;

  SplitQuery query() const { return {grad, hess, slot, totals, 1.0, 0.0, 1.0}; }
};

Problem make_problem(std::size_t rows, std::size_t features, std::size_t slots,
                     std::uint64_t seed) {
  Problem p;
  std::mt19937_64 rng(seed);
  std::lognormal_distribution<float> v(7.0f, 1.2f);
  std::uniform_real_distribution<double> prob(0.05, 0.95);
  p.storage.assign(rows, std::vector<float>(features));
  for (auto& r : p.storage) {
    for (auto& x : r) x = std::floor(v(rng));
  }
  for (const auto& r : p.storage) p.set.rows.emplace_back(r);
  p.set.n_features = features;
  p.totals.resize(slots);
  for (std::size_t i = 0; i < rows; ++i) {
    const double q = prob(rng);
    const int y = static_cast<int>(rng() % 2);
    p.set.labels.push_back(y);
    p.grad.push_back(to_fixed(q - y));
    p.hess.push_back(to_fixed(q * (1 - q)));
    p.slot.push_back(static_cast<std::int32_t>(i % slots));
    auto& t = p.totals[i % slots];
    t.grad += p.grad.back();
    t.hess += p.hess.back();
  }
  return p;
}

template <typename F>
double best_of(int repeats, F&& f) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

bool same(const std::vector<SplitCandidate>& a, const std::vector<SplitCandidate>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].feature != b[i].feature || a[i].threshold != b[i].threshold ||
        (a[i].found() && a[i].gain != b[i].gain)) {
      return false;
    }
  }
  return a.size() == b.size();
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Split-search benchmark: parallel kernel vs serial reference"};
  std::size_t rows = 92, features = 200'000, slots = 4;
  int repeats = 3;
  std::vector<std::size_t> threads;
  std::uint64_t seed = 1;
  app.add_option("--rows", rows)->capture_default_str();
  app.add_option("--features", features)->capture_default_str();
  app.add_option("--slots", slots, "Open nodes in the level")->capture_default_str();
  app.add_option("--repeats", repeats, "Best-of count")->capture_default_str();
  app.add_option("--threads", threads, "Thread counts to try (default: 1, 2, 4, all)");
  app.add_option("--seed", seed)->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  if (threads.empty()) threads = {1, 2, 4, parallel::available_threads()};

  auto p = make_problem(rows, features, slots, seed);
  const auto t0 = std::chrono::steady_clock::now();
  const auto cols = SortedColumns::build(p.set);
  std::printf("matrix %zu x %zu, %zu slots, presort %.3f s, %zu cores available\n", rows, features,
              slots, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(),
              parallel::available_threads());

  std::vector<SplitCandidate> ref;
  const double serial = best_of(repeats, [&] { ref = find_best_splits_serial(cols, p.query()); });
  std::printf("%-10s %8s %10s %8s %s\n", "kernel", "threads", "seconds", "speedup", "result");
  std::printf("%-10s %8s %10.4f %8s %s\n", "serial", "-", serial, "1.00", "reference");
  int status = 0;
  for (auto n : threads) {
    parallel::set_threads(n);
    std::vector<SplitCandidate> got;
    const double t = best_of(repeats, [&] { got = find_best_splits(cols, p.query()); });
    const bool ok = same(got, ref);
    status |= !ok;
    std::printf("%-10s %8zu %10.4f %8.2f %s\n", "openmp", n, t, serial / t,
                ok ? "identical" : "DIFFERS");
  }
  return status;
}
