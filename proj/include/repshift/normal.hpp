#pragma once

namespace repshift {

/// Standard normal CDF.
double normal_cdf(double z);

/// Standard normal density.
double normal_pdf(double z);

/// Standard normal quantile for p in (0, 1). Rational approximation
/// followed by one Halley refinement; absolute error below 1e-13.
/// Returns -inf / +inf at 0 / 1 and NaN outside [0, 1].
double normal_quantile(double p);

}  // namespace repshift
