#pragma once

// Counter-based random streams. A stream is identified by (seed, stream,
// substream); the n-th draw of a stream is a pure function of those values
// and n, so replications can be generated in any order or on any worker.

#include <array>
#include <cstdint>
#include <limits>
#include <random>

#include <Eigen/Dense>

namespace lcsm {

/// Philox4x64-10 (Salmon et al., "Parallel random numbers: as easy as
/// 1, 2, 3") as a UniformRandomBitGenerator.
class Philox {
 public:
  using result_type = std::uint64_t;
  using Block = std::array<std::uint64_t, 4>;
  using Key = std::array<std::uint64_t, 2>;

  Philox(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0)
      : key_{seed, stream}, counter_{0, substream, 0, 0} {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (pos_ == 4) {
      buffer_ = generate(counter_, key_);
      ++counter_[0];
      pos_ = 0;
    }
    return buffer_[pos_++];
  }

  /// The raw block function.
  static Block generate(Block ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += 0x9E3779B97F4A7C15ULL;
        key[1] += 0xBB67AE8584CAA73BULL;
      }
      const auto [hi0, lo0] = mulhilo(0xD2E7470EE14C6C93ULL, ctr[0]);
      const auto [hi1, lo1] = mulhilo(0xCA5A826395121157ULL, ctr[2]);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  static std::array<std::uint64_t, 2> mulhilo(std::uint64_t a, std::uint64_t b) {
    const unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
    return {static_cast<std::uint64_t>(p >> 64), static_cast<std::uint64_t>(p)};
  }

  Key key_;
  Block counter_;
  Block buffer_{};
  int pos_ = 4;
};

/// Draws from MVN(mean, cov); cov may be singular (PSD).
class MultivariateNormal {
 public:
  MultivariateNormal(Eigen::VectorXd mean, const Eigen::MatrixXd& cov) : mean_(std::move(mean)) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() == Eigen::Success) {
      factor_ = llt.matrixL();
    } else {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
      factor_ = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    }
  }

  template <typename Rng>
  Eigen::VectorXd operator()(Rng& rng) {
    Eigen::VectorXd z(mean_.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal_(rng);
    return mean_ + factor_ * z;
  }

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd factor_;
  std::normal_distribution<double> normal_;
};

}  // namespace lcsm
