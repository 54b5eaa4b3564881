#include "fedzo/compressors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "fedzo/errors.hpp"

namespace fedzo {
namespace {

double parse_number(std::string_view text, std::string_view whole) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("bad compressor parameter in '" + std::string(whole) + "'");
  }
  return value;
}

NumVec apply_top_k(std::span<const double> x, int k) {
  const int d = static_cast<int>(x.size());
  std::vector<int> idx(d);
  std::iota(idx.begin(), idx.end(), 0);
  // Ties in magnitude are broken toward the lower index so the kept set is
  // a deterministic function of x.
  std::nth_element(idx.begin(), idx.begin() + (k - 1), idx.end(), [&](int a, int b) {
    const double ma = std::fabs(x[a]), mb = std::fabs(x[b]);
    return ma > mb || (ma == mb && a < b);
  });
  NumVec out(x.size(), 0.0);
  for (int i = 0; i < k; ++i) out[idx[i]] = x[idx[i]];
  return out;
}

NumVec apply_rand_k(std::span<const double> x, int k, RngStream& rng) {
  const int d = static_cast<int>(x.size());
  std::vector<int> idx(d);
  std::iota(idx.begin(), idx.end(), 0);
  // Partial Fisher-Yates: first k entries are a uniform k-subset.
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(d - i)));
    std::swap(idx[i], idx[j]);
  }
  NumVec out(x.size(), 0.0);
  for (int i = 0; i < k; ++i) out[idx[i]] = x[idx[i]];
  return out;
}

NumVec apply_dropout(std::span<const double> x, double p, bool unbiased, RngStream& rng) {
  NumVec out(x.size(), 0.0);
  const double rescale = unbiased ? 1.0 / p : 1.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (rng.next_double() <= p) out[i] = rescale * x[i];
  }
  return out;
}

NumVec apply_qsgd(std::span<const double> x, int bits, RngStream& rng) {
  const double norm = vec::norm(x);
  if (norm == 0.0) return NumVec(x.size(), 0.0);  // qsgd_b(0) = 0
  const double d = static_cast<double>(x.size());
  const double levels = std::ldexp(1.0, bits);  // 2^b
  const double w = 1.0 + std::min(std::sqrt(d) / levels, d / (levels * levels));
  NumVec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double u = rng.next_double();
    const double quantized = std::floor(levels * std::fabs(x[i]) / norm + u);
    out[i] = (x[i] < 0.0 ? -1.0 : 1.0) * norm / (levels * w) * quantized;
  }
  return out;
}

}  // namespace

CompressorSpec CompressorSpec::top_k(int k) {
  CompressorSpec s;
  s.kind = CompressorKind::kTopK;
  s.k = k;
  return s;
}

CompressorSpec CompressorSpec::rand_k(int k) {
  CompressorSpec s;
  s.kind = CompressorKind::kRandK;
  s.k = k;
  return s;
}

CompressorSpec CompressorSpec::dropout_biased(double p) {
  CompressorSpec s;
  s.kind = CompressorKind::kDropoutBiased;
  s.p = p;
  return s;
}

CompressorSpec CompressorSpec::dropout_unbiased(double p) {
  CompressorSpec s;
  s.kind = CompressorKind::kDropoutUnbiased;
  s.p = p;
  return s;
}

CompressorSpec CompressorSpec::qsgd(int bits) {
  CompressorSpec s;
  s.kind = CompressorKind::kQsgd;
  s.bits = bits;
  return s;
}

CompressorSpec CompressorSpec::parse(std::string_view text) {
  CompressorSpec s;
  const auto colon = text.find(':');
  const std::string_view name = text.substr(0, colon);
  const std::string_view arg =
      colon == std::string_view::npos ? std::string_view() : text.substr(colon + 1);
  const bool has_arg = !arg.empty();

  if (name == "none" || name == "identity") {
    if (has_arg) throw ConfigError("compressor 'none' takes no parameter");
    return s;
  }
  if (name == "topk" || name == "randk") {
    s.kind = name == "topk" ? CompressorKind::kTopK : CompressorKind::kRandK;
    if (!has_arg) throw ConfigError("'" + std::string(name) + "' needs a kept fraction");
    s.k_fraction = parse_number(arg, text);
    if (s.k_fraction <= 0.0 || s.k_fraction > 1.0) {
      throw ConfigError("kept fraction must be in (0,1] in '" + std::string(text) + "'");
    }
    return s;
  }
  if (name == "dropout-b" || name == "dropout-u") {
    s.kind = name == "dropout-b" ? CompressorKind::kDropoutBiased
                                 : CompressorKind::kDropoutUnbiased;
    if (!has_arg) throw ConfigError("'" + std::string(name) + "' needs a keep-probability");
    s.p = parse_number(arg, text);
    return s;
  }
  if (name == "qsgd") {
    s.kind = CompressorKind::kQsgd;
    if (!has_arg) throw ConfigError("'qsgd' needs a bit count");
    const double b = parse_number(arg, text);
    s.bits = static_cast<int>(b);
    if (s.bits != b) throw ConfigError("qsgd bits must be an integer in '" + std::string(text) + "'");
    return s;
  }
  throw ConfigError("unknown compressor '" + std::string(text) +
                    "' (expected none|topk:F|randk:F|dropout-b:P|dropout-u:P|qsgd:B)");
}

std::string CompressorSpec::to_string() const {
  const auto frac = [this] {
    return k > 0 ? std::to_string(k) : std::to_string(k_fraction);
  };
  switch (kind) {
    case CompressorKind::kIdentity:
      return "none";
    case CompressorKind::kTopK:
      return "topk:" + frac();
    case CompressorKind::kRandK:
      return "randk:" + frac();
    case CompressorKind::kDropoutBiased:
      return "dropout-b:" + std::to_string(p);
    case CompressorKind::kDropoutUnbiased:
      return "dropout-u:" + std::to_string(p);
    case CompressorKind::kQsgd:
      return "qsgd:" + std::to_string(bits);
  }
  return "none";
}

CompressorSpec CompressorSpec::resolved(std::size_t dim) const {
  CompressorSpec s = *this;
  if ((kind == CompressorKind::kTopK || kind == CompressorKind::kRandK) && s.k == 0) {
    if (s.k_fraction <= 0.0) throw ConfigError("topk/randk needs k or a kept fraction");
    const auto k = static_cast<int>(std::lround(s.k_fraction * static_cast<double>(dim)));
    s.k = std::clamp(k, 1, static_cast<int>(dim));
  }
  return s;
}

void CompressorSpec::validate(std::size_t dim) const {
  if (dim == 0) throw ConfigError("compressor input must be non-empty");
  switch (kind) {
    case CompressorKind::kTopK:
    case CompressorKind::kRandK:
      if (k <= 0) throw ConfigError("topk/randk k must be positive (unresolved fraction?)");
      if (static_cast<std::size_t>(k) > dim) {
        throw ConfigError("topk/randk k=" + std::to_string(k) + " exceeds dim=" +
                          std::to_string(dim));
      }
      break;
    case CompressorKind::kDropoutBiased:
    case CompressorKind::kDropoutUnbiased:
      if (p < 0.0 || p > 1.0) throw ConfigError("dropout keep-probability must be in [0,1]");
      if (kind == CompressorKind::kDropoutUnbiased && p == 0.0) {
        throw ConfigError("dropout-u keep-probability must be positive");
      }
      break;
    case CompressorKind::kQsgd:
      if (bits < 1) throw ConfigError("qsgd bits must be >= 1");
      if (bits > 52) throw ConfigError("qsgd bits above 52 exceed double mantissa");
      break;
    case CompressorKind::kIdentity:
      break;
  }
}

NumVec compress(const CompressorSpec& spec, std::span<const double> x, RngStream& rng) {
  spec.validate(x.size());
  if (!vec::all_finite(x)) throw NumericalError("compress: non-finite input", -1);
  switch (spec.kind) {
    case CompressorKind::kIdentity:
      return NumVec(x.begin(), x.end());
    case CompressorKind::kTopK:
      return apply_top_k(x, spec.k);
    case CompressorKind::kRandK:
      return apply_rand_k(x, spec.k, rng);
    case CompressorKind::kDropoutBiased:
      return apply_dropout(x, spec.p, false, rng);
    case CompressorKind::kDropoutUnbiased:
      return apply_dropout(x, spec.p, true, rng);
    case CompressorKind::kQsgd:
      return apply_qsgd(x, spec.bits, rng);
  }
  throw ConfigError("unknown compressor kind");
}

std::optional<double> analytic_delta(const CompressorSpec& spec, std::size_t dim) {
  if (dim == 0) throw ConfigError("analytic_delta: dim must be >= 1");
  const CompressorSpec s = spec.resolved(dim);
  switch (s.kind) {
    case CompressorKind::kIdentity:
      return 1.0;
    case CompressorKind::kTopK:
    case CompressorKind::kRandK:
      return static_cast<double>(s.k) / static_cast<double>(dim);
    case CompressorKind::kDropoutBiased:
      return s.p;
    case CompressorKind::kDropoutUnbiased:
    case CompressorKind::kQsgd:
      return std::nullopt;
  }
  return std::nullopt;
}

ContractionEstimate estimate_contraction(const CompressorSpec& spec, std::size_t dim,
                                         int trials, RngStream& rng, int directions) {
  if (trials < 1) throw ConfigError("estimate_contraction: trials must be >= 1");
  const CompressorSpec s = spec.resolved(dim);
  s.validate(dim);

  std::vector<NumVec> probes;
  for (std::size_t i = 0; i < dim; ++i) {
    NumVec axis(dim, 0.0);
    axis[i] = 1.0;
    probes.push_back(std::move(axis));
  }
  probes.emplace_back(dim, 1.0 / std::sqrt(static_cast<double>(dim)));
  while (probes.size() < static_cast<std::size_t>(directions) + dim + 1) {
    probes.push_back(rng.gaussian_vector(dim));
  }

  double worst_ratio = 0.0;
  for (const NumVec& x : probes) {
    const double denom = vec::norm_sq(x);
    if (denom == 0.0) continue;
    double mean = 0.0;
    for (int t = 0; t < trials; ++t) {
      const NumVec cx = compress(s, x, rng);
      mean += vec::norm_sq(vec::diff(cx, x)) / denom;
    }
    worst_ratio = std::max(worst_ratio, mean / trials);
  }

  ContractionEstimate est;
  est.delta_hat = 1.0 - worst_ratio;
  est.trials = trials;
  est.dim = dim;
  est.contraction_violated = est.delta_hat <= 0.0;
  return est;
}

std::size_t transmitted_bytes(const CompressorSpec& spec, std::span<const double> compressed) {
  if (spec.kind == CompressorKind::kQsgd) {
    return compressed.size() * static_cast<std::size_t>(spec.bits) / 8 + 8;
  }
  return static_cast<std::size_t>(vec::nonzero_count(compressed)) * 8;
}

}  // namespace fedzo
