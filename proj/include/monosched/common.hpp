#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace monosched {

using Rng = std::mt19937_64;

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::MatrixXi;
using Eigen::VectorXd;
using Eigen::VectorXi;

/// Raised when an iterative procedure (Riccati, value iteration) fails to settle.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an enumeration would exceed its configured size limit.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a caller breaks an operation's precondition (e.g. an infeasible schedule).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Uniform double in [0, 1) built from the top 53 bits of one engine draw.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform double in the open interval (0, 1).
inline double uniform_open01(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

/// Uniform integer in [0, n) by multiply-shift; n must be positive.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(rng()) * n) >> 64);
}

/// splitmix64 finalizer; used to derive independent sub-seeds from a master seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed-splitting rule: stream k of master seed s is seeded with splitmix64(s ^ splitmix64(k)).
inline Rng make_stream(std::uint64_t master, std::uint64_t stream) {
  return Rng(splitmix64(master ^ splitmix64(stream)));
}

/// Named RNG streams fanned out from the experiment's master seed.
enum class Stream : std::uint64_t {
  kSystem = 1,
  kChannel = 2,
  kInit = 3,
  kExplore = 4,
  kReplay = 5,
  kEval = 6,
  kPenalty = 7,
};

inline Rng make_stream(std::uint64_t master, Stream stream) {
  return make_stream(master, static_cast<std::uint64_t>(stream));
}

}  // namespace monosched
