// Copyright 2026 The accboed Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef ACCBOED_POI_HPP
#define ACCBOED_POI_HPP

#include "accboed/common.hpp"
#include "accboed/gp.hpp"

#include <functional>

namespace accboed
{

enum class PoiVariant
{
   VarianceWeighted,  // density proportional to the predictive std
   PosteriorGivenY0,  // surrogate posterior of the parameter given y0
   LimitState         // concentrated on the zero level set of the mean
};

struct PoiKind
{
   PoiVariant variant = PoiVariant::VarianceWeighted;
   double y0 = 0.0;
   double lik_variance = 1.0;
   double lambda = 1.0;

   void validate() const;
};

// Unnormalized log density of the parameter of interest at z; -inf outside
// the domain.
double poi_logdensity(const PoiKind &kind, const GpModel &gp, const Vector &z,
                      const Box &domain);

// 0.1 x the standard deviation of the GP mean over a uniform grid.
double default_lambda(const GpModel &gp, const Box &domain, int per_axis = 41);

struct McmcConfig
{
   int n_samples = 200;
   int burn_in = 500;
   double proposal_scale = 0.1;  // fraction of the domain diameter
   int n_chains = 4;
   int thin = 5;
   std::uint64_t seed = 0;
   // Optional chain starts (rows, reused cyclically); empty selects LHS.
   Matrix initial_points;

   void validate() const;
};

struct SampleSet
{
   Matrix points;  // n_samples x dim
   double acceptance_rate = 0.0;
   bool flagged = false;  // acceptance outside [0.05, 0.95]
};

using LogDensity = std::function<double(const Vector &)>;

// Random-walk Metropolis with an isotropic Gaussian proposal adapted toward
// 30% acceptance during burn-in. Chains start at LHS points and run on
// independent streams; the pooled result does not depend on scheduling.
SampleSet mh_sample(const LogDensity &logdensity, const Box &domain,
                    const McmcConfig &config, Exec exec = Exec::Parallel);

}  // namespace accboed

#endif  // ACCBOED_POI_HPP
