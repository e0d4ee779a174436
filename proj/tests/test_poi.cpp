// Copyright 2026 The accboed Authors
// SPDX-License-Identifier: Apache-2.0

#include "accboed/benchmarks.hpp"
#include "accboed/poi.hpp"
#include "accboed/sampling.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

using namespace accboed;

namespace
{

Box interval(double lo, double hi) { return Box(Vector::Constant(1, lo), Vector::Constant(1, hi)); }

// Asymptotic Kolmogorov tail with the Stephens small-sample correction.
double ks_pvalue(double d, int n)
{
   const double sn = std::sqrt(double(n));
   const double lam = (sn + 0.12 + 0.11 / sn) * d;
   double p = 0.0;
   for (int k = 1; k <= 100; ++k)
   {
      p += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lam * lam);
   }
   return std::clamp(p, 0.0, 1.0);
}

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

GpModel fit_on(const ProblemSpec &p, int n, std::uint64_t seed)
{
   const Matrix x = lhs_sample(n, p.domain, seed);
   Vector y(n);
   for (int i = 0; i < n; ++i) { y(i) = p.truth(x.row(i).transpose()); }
   const Dataset d(x, y);
   return fit_gp(d, p.kernel_init, p.noise_init, default_bounds(d, p.domain.diameter())).model;
}

}  // namespace

TEST_CASE("LimitState log density at the boundary and at lambda")
{
   const Box box = interval(-1.0, 1.0);
   const KernelSpec k{KernelFamily::SquaredExponential, 1.0, 0.5, 2.5};
   const Vector z = Vector::Constant(1, 0.2);
   PoiKind kind;
   kind.variant = PoiVariant::LimitState;
   kind.lambda = 0.25;
   const GpModel zero(Dataset(z.transpose(), Vector::Constant(1, 0.0)), k, 0.0);
   CHECK(poi_logdensity(kind, zero, z, box) == doctest::Approx(0.0));
   const GpModel at_lambda(Dataset(z.transpose(), Vector::Constant(1, 0.25)), k, 0.0);
   CHECK(poi_logdensity(kind, at_lambda, z, box) == doctest::Approx(-1.0).epsilon(1e-10));
   CHECK(poi_logdensity(kind, zero, Vector::Constant(1, 1.5), box) ==
         -std::numeric_limits<double>::infinity());

   kind.lambda = 0.0;
   CHECK_THROWS(kind.validate());
   PoiKind post;
   post.variant = PoiVariant::PosteriorGivenY0;
   post.lik_variance = 0.0;
   CHECK_THROWS(post.validate());
}

TEST_CASE("VarianceWeighted is log of the predictive std")
{
   const Box box = interval(0.0, 4.0);
   const GpModel gp(Dataset(Matrix::Constant(1, 1, 1.0), Vector::Constant(1, 0.4)),
                    {KernelFamily::SquaredExponential, 2.0, 1.0, 2.5}, 1e-6);
   PoiKind kind;
   for (double z : {0.5, 2.0, 3.7})
   {
      Vector m, v;
      gp.predict_marginal(Matrix::Constant(1, 1, z), m, v);
      CHECK(poi_logdensity(kind, gp, Vector::Constant(1, z), box) ==
            doctest::Approx(0.5 * std::log(v(0))));
   }
}

TEST_CASE("PosteriorGivenY0 on a converged erf GP peaks near 0.7")
{
   const ProblemSpec p = make_problem("erf");
   const GpModel gp = fit_on(p, 20, 3);
   double best = -std::numeric_limits<double>::infinity();
   double arg = 0.0;
   for (int i = 0; i <= 1000; ++i)
   {
      const double z = i / 1000.0;
      const double l = poi_logdensity(p.poi_kind, gp, Vector::Constant(1, z), p.domain);
      if (l > best)
      {
         best = l;
         arg = z;
      }
   }
   CHECK(std::abs(arg - 0.7) < 0.05);
}

TEST_CASE("MH on N(0,1): moments and KS")
{
   const Box box = interval(-10.0, 10.0);
   McmcConfig cfg;
   cfg.n_samples = 100000;
   cfg.n_chains = 8;
   cfg.burn_in = 2000;
   cfg.thin = 10;
   cfg.seed = 99;
   const SampleSet s = mh_sample([](const Vector &x) { return -0.5 * x(0) * x(0); }, box, cfg);
   REQUIRE(s.points.rows() == 100000);
   const double mean = s.points.col(0).mean();
   const double var = (s.points.col(0).array() - mean).square().mean();
   CHECK(std::abs(mean) < 0.05);
   CHECK(std::abs(var - 1.0) < 0.1);
   CHECK_FALSE(s.flagged);
   for (int i = 0; i < s.points.rows(); ++i) { CHECK(box.contains(s.points.row(i).transpose())); }

   std::vector<double> xs(s.points.data(), s.points.data() + s.points.rows());
   std::sort(xs.begin(), xs.end());
   const int n = static_cast<int>(xs.size());
   double d = 0.0;
   for (int i = 0; i < n; ++i)
   {
      const double f = std_normal_cdf(xs[i]);
      d = std::max({d, f - double(i) / n, double(i + 1) / n - f});
   }
   CHECK(ks_pvalue(d, n) > 0.01);
}

TEST_CASE("MH with a constant density accepts every in-domain proposal")
{
   const Box box(Vector::Constant(2, 0.0), Vector::Constant(2, 1.0));
   McmcConfig cfg;
   cfg.n_samples = 400;
   cfg.n_chains = 2;
   cfg.burn_in = 0;
   cfg.thin = 1;
   cfg.proposal_scale = 1e-6;  // keeps every proposal inside the box
   cfg.seed = 1;
   const SampleSet s = mh_sample([](const Vector &) { return 0.0; }, box, cfg);
   CHECK(s.acceptance_rate == 1.0);
}

TEST_CASE("MH two-mode occupancy and serial/parallel agreement")
{
   const Box box = interval(-6.0, 6.0);
   auto target = [](const Vector &x)
   {
      const double a = std::exp(-0.5 * std::pow((x(0) - 1.5) / 0.6, 2));
      const double b = std::exp(-0.5 * std::pow((x(0) + 1.5) / 0.6, 2));
      return std::log(a + b);
   };
   McmcConfig cfg;
   cfg.n_samples = 100000;
   cfg.n_chains = 8;
   cfg.burn_in = 2000;
   cfg.thin = 5;
   cfg.seed = 7;
   const SampleSet s = mh_sample(target, box, cfg, Exec::Parallel);
   const long right = (s.points.col(0).array() > 0.0).count();
   const double ratio = double(right) / double(s.points.rows() - right);
   CHECK(std::abs(ratio - 1.0) < 0.1);

   cfg.n_samples = 2000;
   const SampleSet a = mh_sample(target, box, cfg, Exec::Serial);
   const SampleSet b = mh_sample(target, box, cfg, Exec::Parallel);
   CHECK(a.points == b.points);
}

TEST_CASE("LimitState sampling on a converged circle GP hugs the boundary")
{
   const ProblemSpec p = make_problem("circle");
   const GpModel gp = fit_on(p, 150, 5);
   PoiKind kind = p.poi_kind;
   kind.lambda = default_lambda(gp, p.domain);
   McmcConfig cfg;
   cfg.n_samples = 2000;
   cfg.seed = 4;
   const SampleSet s = mh_sample(
      [&](const Vector &z) { return poi_logdensity(kind, gp, z, p.domain); }, p.domain, cfg);
   int inside = 0;
   for (int i = 0; i < s.points.rows(); ++i)
   {
      if (std::abs(circle_model(s.points.row(i).transpose())) <= 3.0 * kind.lambda) { ++inside; }
   }
   CHECK(inside >= 0.9 * s.points.rows());
}
