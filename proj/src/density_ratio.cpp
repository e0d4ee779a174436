// Copyright 2026 The accboed Authors
// SPDX-License-Identifier: Apache-2.0

#include "accboed/density_ratio.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace accboed
{

namespace
{
constexpr double kLog2Pi = 1.8378770664093453;
}

double ScalarGaussian::pdf(double y) const { return std::exp(gaussian_logpdf(*this, y)); }

double RatioGaussian::value(double y) const
{
   return std::exp(log_norm + gaussian_logpdf(ScalarGaussian{mean, variance}, y));
}

DegenerateRatio::DegenerateRatio(double num_variance, double den_variance)
   : std::domain_error("degenerate Gaussian ratio: numerator variance " +
                       std::to_string(num_variance) +
                       " is not below denominator variance " +
                       std::to_string(den_variance)),
     num_variance_(num_variance), den_variance_(den_variance)
{
}

RatioGaussian gaussian_ratio(const ScalarGaussian &num, const ScalarGaussian &den)
{
   const double s1 = num.variance;
   const double s2 = den.variance;
   if (!(s1 > 0.0) || !(s2 > 0.0) || !(s1 < s2 * (1.0 - 1e-8)))
   {
      throw DegenerateRatio(s1, s2);
   }
   RatioGaussian r;
   const double gap = s2 - s1;
   // (1/s1 - 1/s2)^{-1} written without the cancellation.
   r.variance = s1 * s2 / gap;
   r.mean = r.variance * (num.mean / s1 - den.mean / s2);
   // Z = |s2| / |s2 - s1| / N(m1 | m2, s2 - s1), in log space.
   r.log_norm = std::log(s2 / gap) -
                gaussian_logpdf(ScalarGaussian{den.mean, gap}, num.mean);
   return r;
}

double gaussian_logpdf(const ScalarGaussian &g, double y)
{
   const double d = y - g.mean;
   return -0.5 * (kLog2Pi + std::log(g.variance) + d * d / g.variance);
}

double gaussian_kl(const ScalarGaussian &p, const ScalarGaussian &q)
{
   const double d = p.mean - q.mean;
   const double kl = 0.5 * std::log(q.variance / p.variance) +
                     (p.variance + d * d) / (2.0 * q.variance) - 0.5;
   return kl > 0.0 ? kl : 0.0;
}

}  // namespace accboed
