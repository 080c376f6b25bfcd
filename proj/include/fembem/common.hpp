#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace fembem {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;

inline constexpr double kPi = 3.14159265358979323846264338327950288;
inline constexpr double kMu0 = 4.0e-7 * kPi;  // vacuum permeability [T m / A]

struct MeshError : std::runtime_error { using std::runtime_error::runtime_error; };
struct ConfigError : std::runtime_error { using std::runtime_error::runtime_error; };
struct AssemblyError : std::runtime_error { using std::runtime_error::runtime_error; };
struct NearFieldError : std::runtime_error { using std::runtime_error::runtime_error; };
struct IoError : std::runtime_error { using std::runtime_error::runtime_error; };

// Process-wide worker count for assembly loops. Results are identical for any
// value; it only controls wall time.
inline std::atomic<int>& thread_count_storage() {
  static std::atomic<int> n{0};
  return n;
}

inline int thread_count() {
  int n = thread_count_storage().load();
  if (n > 0) return n;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

inline void set_thread_count(int n) { thread_count_storage().store(n); }

// Splits [0, n) into contiguous chunks, one worker each. Workers must write to
// disjoint locations; there is no reduction step, so the result does not
// depend on the number of workers.
template <class F>
void parallel_for_chunks(std::size_t n, F&& body) {
  const int nt = thread_count();
  if (nt <= 1 || n < 2) {
    body(std::size_t{0}, n);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(nt), n);
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&body, lo, hi] { body(lo, hi); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace fembem
