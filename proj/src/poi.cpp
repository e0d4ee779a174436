// Copyright 2026 The accboed Authors
// SPDX-License-Identifier: Apache-2.0

#include "accboed/poi.hpp"

#include "accboed/density_ratio.hpp"
#include "accboed/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace accboed
{

namespace
{

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct ChainResult
{
   Matrix draws;
   long accepted = 0;
   long proposed = 0;
   bool failed = false;
};

ChainResult run_chain(const LogDensity &logdensity, const Box &domain,
                      const McmcConfig &cfg, const Vector &start, int chain,
                      int n_keep)
{
   ChainResult out;
   const int dim = domain.dim();
   Rng rng = make_stream(cfg.seed, 0x6d63, static_cast<std::uint64_t>(chain));
   std::normal_distribution<double> normal(0.0, 1.0);
   std::uniform_real_distribution<double> unit(0.0, 1.0);

   const double diameter = domain.diameter();
   double scale = cfg.proposal_scale * diameter;
   Vector x = start;
   double lp = logdensity(x);
   out.draws.resize(n_keep, dim);

   const int total = cfg.burn_in + n_keep * cfg.thin;
   int streak = 0;
   int window_accepts = 0;
   int kept = 0;
   Vector proposal(dim);
   for (int step = 0; step < total; ++step)
   {
      for (int j = 0; j < dim; ++j) { proposal(j) = x(j) + scale * normal(rng); }
      const double lq = domain.contains(proposal) ? logdensity(proposal) : kNegInf;
      const double u = unit(rng);
      const bool accept = lq > kNegInf && (lp == kNegInf || std::log(u) < lq - lp);
      if (accept)
      {
         x = proposal;
         lp = lq;
         streak = 0;
         ++window_accepts;
      }
      else if (++streak >= 10 * dim)
      {
         scale *= 0.5;
         streak = 0;
         if (scale < 1e-12 * diameter)
         {
            out.failed = true;
            return out;
         }
      }
      if (step < cfg.burn_in)
      {
         if ((step + 1) % 50 == 0)
         {
            const double rate = window_accepts / 50.0;
            scale *= std::exp(std::clamp(2.0 * (rate - 0.3), -0.7, 0.7));
            window_accepts = 0;
         }
         continue;
      }
      ++out.proposed;
      if (accept) { ++out.accepted; }
      if ((step - cfg.burn_in + 1) % cfg.thin == 0 && kept < n_keep)
      {
         out.draws.row(kept++) = x.transpose();
      }
   }
   return out;
}

}  // namespace

void PoiKind::validate() const
{
   if (variant == PoiVariant::LimitState && !(lambda > 0.0))
   {
      throw std::invalid_argument("PoiKind: lambda must be > 0");
   }
   if (variant == PoiVariant::PosteriorGivenY0 && !(lik_variance > 0.0))
   {
      throw std::invalid_argument("PoiKind: lik_variance must be > 0");
   }
}

double poi_logdensity(const PoiKind &kind, const GpModel &gp, const Vector &z,
                      const Box &domain)
{
   if (!domain.contains(z)) { return kNegInf; }
   Vector mean, var;
   gp.predict_marginal(Matrix(z.transpose()), mean, var);
   switch (kind.variant)
   {
   case PoiVariant::VarianceWeighted:
      return var(0) > 0.0 ? 0.5 * std::log(var(0)) : kNegInf;
   case PoiVariant::PosteriorGivenY0:
      // The uniform prior over the box only contributes a constant.
      return gaussian_logpdf(ScalarGaussian{mean(0), var(0) + kind.lik_variance}, kind.y0);
   case PoiVariant::LimitState:
      return -std::abs(mean(0)) / kind.lambda;
   }
   return kNegInf;
}

double default_lambda(const GpModel &gp, const Box &domain, int per_axis)
{
   const Matrix grid = uniform_grid(domain, per_axis);
   Vector mean, var;
   gp.predict_marginal(grid, mean, var);
   const double m = mean.mean();
   const double sd = std::sqrt((mean.array() - m).square().sum() / double(mean.size()));
   return sd > 0.0 ? 0.1 * sd : 1e-3;
}

void McmcConfig::validate() const
{
   if (n_samples < 1 || n_chains < 1 || burn_in < 0 || thin < 1 || !(proposal_scale > 0.0))
   {
      throw std::invalid_argument("McmcConfig: invalid settings");
   }
}

SampleSet mh_sample(const LogDensity &logdensity, const Box &domain,
                    const McmcConfig &config, Exec exec)
{
   config.validate();
   const int dim = domain.dim();
   const int per_chain = (config.n_samples + config.n_chains - 1) / config.n_chains;

   // Chain starts: LHS points, falling back to further LHS draws when the
   // target vanishes at a start.
   Rng start_rng = make_stream(config.seed, 0x7374);
   Matrix starts = lhs_sample(config.n_chains, domain, start_rng);
   if (config.initial_points.rows() > 0)
   {
      if (config.initial_points.cols() != dim)
      {
         throw DimensionError("mh_sample: initial_points dimension mismatch");
      }
      for (int c = 0; c < config.n_chains; ++c)
      {
         starts.row(c) = config.initial_points.row(c % config.initial_points.rows());
      }
   }
   for (int c = 0; c < config.n_chains; ++c)
   {
      for (int attempt = 0; attempt < 100 && !(logdensity(starts.row(c).transpose()) > kNegInf);
           ++attempt)
      {
         starts.row(c) = uniform_sample(1, domain, start_rng).row(0);
      }
   }

   std::vector<ChainResult> chains(config.n_chains);
   if (exec == Exec::Parallel)
   {
#pragma omp parallel for schedule(dynamic, 1)
      for (int c = 0; c < config.n_chains; ++c)
      {
         chains[c] = run_chain(logdensity, domain, config, starts.row(c).transpose(), c, per_chain);
      }
   }
   else
   {
      for (int c = 0; c < config.n_chains; ++c)
      {
         chains[c] = run_chain(logdensity, domain, config, starts.row(c).transpose(), c, per_chain);
      }
   }

   SampleSet out;
   out.points.resize(config.n_samples, dim);
   long accepted = 0;
   long proposed = 0;
   int row = 0;
   for (const auto &ch : chains)
   {
      if (ch.failed)
      {
         throw std::runtime_error("mh_sample: proposal scale underflow (all proposals rejected)");
      }
      accepted += ch.accepted;
      proposed += ch.proposed;
      for (int i = 0; i < ch.draws.rows() && row < config.n_samples; ++i)
      {
         out.points.row(row++) = ch.draws.row(i);
      }
   }
   out.acceptance_rate = proposed > 0 ? double(accepted) / double(proposed) : 0.0;
   out.flagged = out.acceptance_rate < 0.05 || out.acceptance_rate > 0.95;
   return out;
}

}  // namespace accboed
