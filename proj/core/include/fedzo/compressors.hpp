#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "fedzo/rng.hpp"
#include "fedzo/vec.hpp"

namespace fedzo {

enum class CompressorKind {
  kIdentity,
  kTopK,
  kRandK,
  kDropoutBiased,
  kDropoutUnbiased,
  kQsgd,
};

/// Tagged choice of compression operator plus its parameter.
///
/// String forms: "none", "topk:F", "randk:F", "dropout-b:P", "dropout-u:P",
/// "qsgd:B". For topk/randk, F in (0,1] is the kept fraction of the input
/// dimension; the integer k is resolved against the actual vector length
/// with resolved(). A spec constructed programmatically may set k directly.
struct CompressorSpec {
  CompressorKind kind = CompressorKind::kIdentity;
  int k = 0;                  // TopK/RandK element count (0 = use k_fraction)
  double k_fraction = -1.0;   // TopK/RandK fraction of dim, used when k == 0
  double p = 1.0;             // dropout keep-probability
  int bits = 1;               // qsgd quantization bits

  static CompressorSpec identity() { return {}; }
  static CompressorSpec top_k(int k);
  static CompressorSpec rand_k(int k);
  static CompressorSpec dropout_biased(double p);
  static CompressorSpec dropout_unbiased(double p);
  static CompressorSpec qsgd(int bits);

  static CompressorSpec parse(std::string_view text);
  std::string to_string() const;

  /// Spec with k pinned to this dimension (k = clamp(round(fraction*dim))).
  CompressorSpec resolved(std::size_t dim) const;

  /// Throws ConfigError when parameters are invalid for vectors of size dim.
  void validate(std::size_t dim) const;
};

/// Applies C(x). Deterministic given the rng state. Throws ConfigError on
/// parameter/dimension mismatch and NumericalError on non-finite input.
NumVec compress(const CompressorSpec& spec, std::span<const double> x, RngStream& rng);

/// Contraction constant delta with E||C(x)-x||^2 <= (1-delta)||x||^2, when a
/// closed form is known: k/dim for TopK and RandK, p for biased dropout, 1
/// for identity. nullopt for qsgd and unbiased dropout.
std::optional<double> analytic_delta(const CompressorSpec& spec, std::size_t dim);

struct ContractionEstimate {
  double delta_hat = 0.0;  // 1 - worst observed E||C(x)-x||^2 / ||x||^2
  int trials = 0;
  std::size_t dim = 0;
  bool contraction_violated = false;  // delta_hat <= 0: not a contraction
};

/// Monte-Carlo worst-case contraction ratio: for each probe direction the
/// ratio is averaged over `trials` applications of C, and delta_hat is one
/// minus the largest ratio seen. Probes are the axis directions, the uniform
/// direction and Gaussian draws, at least `directions` in total.
ContractionEstimate estimate_contraction(const CompressorSpec& spec, std::size_t dim,
                                         int trials, RngStream& rng, int directions = 24);

/// Bytes-transmitted accounting proxy: nonzero count * 8 for selection
/// schemes, dim * bits/8 + 8 (the norm scalar) for qsgd. No actual packing.
std::size_t transmitted_bytes(const CompressorSpec& spec, std::span<const double> compressed);

}  // namespace fedzo
