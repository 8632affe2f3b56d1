#pragma once

// Shared random precoder, zero-forcing post-processor and the rank identity
// that counts interference-free dimensions.

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <json.hpp>

#include "bia/coherence.hpp"
#include "bia/error.hpp"
#include "bia/random.hpp"

namespace bia {

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr double kDefaultRankTolerance = 1e-10;

/// n x n/2 precoder shared by every transmitter.
struct Precoder {
  CMatrix V;
  double total_power = 0.0;

  std::size_t n() const noexcept { return static_cast<std::size_t>(V.rows()); }
  std::size_t layers() const noexcept { return static_cast<std::size_t>(V.cols()); }
};

/// Orthogonal projector onto the complement of the precoder's column space.
struct ZeroForcer {
  CMatrix D;
};

struct DiagonalChannel {
  CVector diag;

  static DiagonalChannel from_trace(const ChannelTrace& trace) {
    DiagonalChannel h;
    h.diag.resize(static_cast<Eigen::Index>(trace.n()));
    for (std::size_t t = 0; t < trace.n(); ++t) h.diag[static_cast<Eigen::Index>(t)] = trace.values[t];
    return h;
  }

  static DiagonalChannel constant(std::size_t n, std::complex<double> value) {
    return {CVector::Constant(static_cast<Eigen::Index>(n), value)};
  }

  /// H * M without forming the dense diagonal.
  CMatrix apply(const CMatrix& m) const { return diag.asDiagonal() * m; }
};

/// Number of singular values above tol_scale * max(rows, cols) * sigma_max.
inline std::size_t numerical_rank(const CMatrix& m, double tol_scale = kDefaultRankTolerance) {
  if (!m.allFinite()) throw NumericalError("numerical_rank: matrix has non-finite entries");
  if (m.size() == 0) return 0;
  // JacobiSVD: BDCSVD in Eigen 3.4 can return NaN singular values for
  // projectors (clustered singular values at exactly 1).
  const Eigen::JacobiSVD<CMatrix> svd(m);
  const auto& sv = svd.singularValues();
  if (!sv.allFinite()) throw NumericalError("numerical_rank: SVD did not converge");
  const double largest = sv.size() > 0 ? sv[0] : 0.0;
  if (largest == 0.0) return 0;
  const double threshold =
      tol_scale * static_cast<double>(std::max(m.rows(), m.cols())) * largest;
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv[i] > threshold) ++rank;
  }
  return rank;
}

inline CMatrix random_gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  CMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  // Column-major fill keeps the draw order tied to the storage order.
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = rng.complex_normal();
  }
  return m;
}

inline constexpr int kPrecoderAttempts = 3;

/// Random full-rank n x n/2 precoder with i.i.d. complex Gaussian entries,
/// scaled so that ||V||_F^2 = n * P_t, i.e. (1/n) tr(V x x^H V^H) has mean P_t
/// for unit-power layer symbols x.
inline Precoder gen_precoder(std::size_t n, double total_power, std::uint64_t seed) {
  if (n < 2 || n % 2 != 0) throw ParameterError("precoder needs an even block length >= 2");
  if (!(total_power > 0.0)) throw ParameterError("total power must be positive");

  Rng rng(seed);
  for (int attempt = 0; attempt < kPrecoderAttempts; ++attempt) {
    CMatrix v = random_gaussian_matrix(n, n / 2, rng);
    const double fro2 = v.squaredNorm();
    if (fro2 == 0.0) continue;
    v *= std::sqrt(static_cast<double>(n) * total_power / fro2);
    if (numerical_rank(v) == n / 2) return {std::move(v), total_power};
  }
  throw NumericalError("gen_precoder: no full-rank draw after " +
                       std::to_string(kPrecoderAttempts) + " attempts");
}

/// D = I - V (V^H V)^{-1} V^H.
inline ZeroForcer zero_forcing_matrix(const Precoder& prec) {
  const CMatrix& v = prec.V;
  const auto rank = numerical_rank(v);
  if (rank != static_cast<std::size_t>(v.cols())) {
    throw NumericalError("zero_forcing_matrix: precoder has rank " + std::to_string(rank) +
                         " but " + std::to_string(v.cols()) + " columns");
  }
  const CMatrix gram = v.adjoint() * v;
  const Eigen::LDLT<CMatrix> ldlt(gram);
  if (ldlt.info() != Eigen::Success) {
    throw NumericalError("zero_forcing_matrix: Gram matrix factorization failed");
  }
  CMatrix d = CMatrix::Identity(v.rows(), v.rows()) - v * ldlt.solve(v.adjoint());
  // Remove the rounding-level anti-Hermitian part.
  d = (0.5 * (d + d.adjoint())).eval();
  return {std::move(d)};
}

inline void check_lemma_args(std::size_t n, std::size_t dv, std::size_t longest) {
  if (n == 0) throw ParameterError("block length must be positive");
  if (dv < 1 || dv > n) throw ParameterError("d_v must lie in [1, n]");
  if (longest < 1 || longest > n) throw ParameterError("longest run must lie in [1, n]");
}

/// rank([V  H V]) = min(d_v + min(d_v, n - F), n) almost surely.
inline std::size_t lemma1_predicted_rank(std::size_t n, std::size_t dv, std::size_t longest) {
  check_lemma_args(n, dv, longest);
  return std::min(dv + std::min(dv, n - longest), n);
}

struct RankCheckReport {
  std::size_t trials = 0;
  std::size_t agreements = 0;
  std::size_t predicted = 0;

  double pass_fraction() const noexcept {
    return trials == 0 ? 0.0 : static_cast<double>(agreements) / static_cast<double>(trials);
  }
};

/// Samples V (n x d_v, Gaussian) and a diagonal channel whose longest run is
/// exactly F, and counts how often numerical_rank([V HV]) matches the
/// prediction. Trial t uses seed + t.
inline RankCheckReport verify_lemma1(std::size_t n, std::size_t dv, std::size_t longest,
                                     std::size_t trials, std::uint64_t seed,
                                     double tol_scale = kDefaultRankTolerance,
                                     const MagnitudeBounds& bounds = {}) {
  check_lemma_args(n, dv, longest);
  RankCheckReport report{trials, 0, lemma1_predicted_rank(n, dv, longest)};
  const auto runs = runs_with_longest(n, longest);

  CMatrix stacked(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(2 * dv));
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng(seed + t);
    const CMatrix v = random_gaussian_matrix(n, dv, rng);
    const auto h = DiagonalChannel::from_trace(trace_from_runs(runs, bounds, rng));
    stacked.leftCols(static_cast<Eigen::Index>(dv)) = v;
    stacked.rightCols(static_cast<Eigen::Index>(dv)) = h.apply(v);
    if (numerical_rank(stacked, tol_scale) == report.predicted) ++report.agreements;
  }
  return report;
}

/// Interference-free dimensions seen by the receiver, min(n/2, n - F).
/// This is also the number of decodable layers l_s.
inline std::size_t free_interference_dims(std::size_t n, std::size_t direct_longest) {
  if (n == 0 || n % 2 != 0) throw ParameterError("block length must be even");
  if (direct_longest < 1 || direct_longest > n) {
    throw ParameterError("longest run must lie in [1, n]");
  }
  return std::min(n / 2, n - direct_longest);
}

/// max |(D H V x)_t|. Vanishes when H is a scalar multiple of the identity.
inline double check_interference_nulled(const ZeroForcer& zf, const DiagonalChannel& cross,
                                        const Precoder& prec, const CVector& x) {
  if (x.size() != prec.V.cols()) throw ParameterError("symbol vector has the wrong length");
  if (cross.diag.size() != prec.V.rows()) throw ParameterError("channel has the wrong length");
  const CVector received = cross.diag.asDiagonal() * (prec.V * x);
  return (zf.D * received).cwiseAbs().maxCoeff();
}

// Matrix files: one line of JSON header followed by little-endian complex128
// entries in column-major order, real part first.

static_assert(std::endian::native == std::endian::little,
              "matrix files are written in host byte order");

inline void write_matrix(std::ostream& out, const CMatrix& m) {
  const nlohmann::json header = {
      {"rows", m.rows()}, {"cols", m.cols()}, {"dtype", "complex128"}, {"order", "column-major"}};
  out << header.dump() << '\n';
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      const double parts[2] = {m(r, c).real(), m(r, c).imag()};
      out.write(reinterpret_cast<const char*>(parts), sizeof parts);
    }
  }
}

inline CMatrix read_matrix(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParameterError("matrix file: missing header");
  const auto header = nlohmann::json::parse(line);
  if (header.at("dtype") != "complex128" || header.at("order") != "column-major") {
    throw ParameterError("matrix file: unsupported dtype or order");
  }
  const auto rows = header.at("rows").get<Eigen::Index>();
  const auto cols = header.at("cols").get<Eigen::Index>();
  CMatrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) {
      double parts[2];
      if (!in.read(reinterpret_cast<char*>(parts), sizeof parts)) {
        throw ParameterError("matrix file: truncated payload");
      }
      m(r, c) = {parts[0], parts[1]};
    }
  }
  return m;
}

}  // namespace bia
