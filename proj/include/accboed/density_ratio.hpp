// Copyright 2026 The accboed Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef ACCBOED_DENSITY_RATIO_HPP
#define ACCBOED_DENSITY_RATIO_HPP

#include <stdexcept>

namespace accboed
{

struct ScalarGaussian
{
   double mean = 0.0;
   double variance = 1.0;

   double pdf(double y) const;
};

// exp(log_norm) * N(y | mean, variance) equals the pointwise quotient of the
// two Gaussians it was built from.
struct RatioGaussian
{
   double mean = 0.0;
   double variance = 1.0;
   double log_norm = 0.0;

   double value(double y) const;
};

class DegenerateRatio : public std::domain_error
{
public:
   DegenerateRatio(double num_variance, double den_variance);
   double num_variance() const { return num_variance_; }
   double den_variance() const { return den_variance_; }

private:
   double num_variance_;
   double den_variance_;
};

// num / den for num.variance < den.variance. Throws DegenerateRatio when
// num.variance >= den.variance * (1 - 1e-8).
RatioGaussian gaussian_ratio(const ScalarGaussian &num, const ScalarGaussian &den);

double gaussian_logpdf(const ScalarGaussian &g, double y);

// KL(p || q) in nats.
double gaussian_kl(const ScalarGaussian &p, const ScalarGaussian &q);

}  // namespace accboed

#endif  // ACCBOED_DENSITY_RATIO_HPP
