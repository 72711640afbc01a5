#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

// Index conventions used throughout the library:
//   - sites and bonds are 0-based; bond k couples site k with site (k+1) mod N
//   - composite bond-pair index <a,b> = a*m + b, where a is the bra (conjugated)
//     component and b the ket component
//   - a site matrix A (m x m) is flattened row-major: vec(A)[mu*m + nu] = A(mu,nu)
//   - a site vector x (dim d*m*m) stacks the d flattened site matrices, physical
//     index slowest: x[i*m*m + mu*m + nu] = A^i(mu,nu)
// A mismatch in any of these is a silent bug; every module contracts against them.

namespace mpsring {

using cxd = std::complex<double>;
using MatC = Eigen::MatrixXcd;
using VecC = Eigen::VectorXcd;
using MatR = Eigen::MatrixXd;
using VecR = Eigen::VectorXd;

inline constexpr const char* kVersion = "0.1.0";

// Deterministic RNG (splitmix64 core). std::normal_distribution is
// implementation-defined, so Gaussian draws go through an explicit
// Box-Muller transform to keep seeded runs bit-identical everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in (0, 1]
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double th = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(th);
    have_spare_ = true;
    return r * std::cos(th);
  }

  cxd cgaussian() {
    double re = gaussian();
    double im = gaussian();
    return cxd(re, im);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0;
  bool have_spare_ = false;
};

// Stable derivation of sub-seeds from a master seed and context labels.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  Rng r(base ^ (a * 0xd1342543de82ef95ULL) ^ (b * 0xaf251af3b0f025b5ULL) ^
        (c * 0x9e6c63d0a38c9f63ULL));
  r.next_u64();
  return r.next_u64();
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace mpsring
