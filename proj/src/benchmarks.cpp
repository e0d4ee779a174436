// Copyright 2026 The accboed Authors
// SPDX-License-Identifier: Apache-2.0

#include "accboed/benchmarks.hpp"

#include "accboed/kdv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <stdexcept>

namespace accboed
{

namespace
{

constexpr long kFailureBlock = 1L << 15;
constexpr double kInvSqrtPi = 0.5641895835477562869;

// erfc(x) for x >= 2.5 by the continued fraction
// erfc(x) = exp(-x^2)/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))).
double erfc_continued_fraction(double x)
{
   constexpr double tiny = 1e-300;
   double f = x;
   double c = x;
   double d = 0.0;
   for (int n = 1; n < 500; ++n)
   {
      const double a = 0.5 * n;
      d = x + a * d;
      d = std::abs(d) < tiny ? 1.0 / tiny : 1.0 / d;
      c = x + a / c;
      if (std::abs(c) < tiny) { c = tiny; }
      const double delta = c * d;
      f *= delta;
      if (std::abs(delta - 1.0) < 1e-16) { break; }
   }
   return std::exp(-x * x) * kInvSqrtPi / f;
}

double erf_maclaurin(double x)
{
   const double x2 = x * x;
   double term = x;  // (-1)^n x^(2n+1) / n!
   double sum = x;
   for (int n = 1; n < 200; ++n)
   {
      term *= -x2 / n;
      const double add = term / (2 * n + 1);
      sum += add;
      if (std::abs(add) < 1e-17 * std::abs(sum)) { break; }
   }
   return 2.0 * kInvSqrtPi * sum;
}

}  // namespace

double erf_series(double x)
{
   if (std::isnan(x)) { return x; }
   const double ax = std::abs(x);
   const double v = ax < 2.5 ? erf_maclaurin(ax) : 1.0 - erfc_continued_fraction(ax);
   return x < 0.0 ? -v : v;
}

double erf_inverse(double y)
{
   if (!(y > -1.0 && y < 1.0))
   {
      if (y == 1.0) { return std::numeric_limits<double>::infinity(); }
      if (y == -1.0) { return -std::numeric_limits<double>::infinity(); }
      throw std::domain_error("erf_inverse: argument outside [-1, 1]");
   }
   // Safeguarded Newton on a bracket.
   double lo = -6.0;
   double hi = 6.0;
   double x = 0.0;
   for (int it = 0; it < 100; ++it)
   {
      const double f = erf_series(x) - y;
      if (f > 0.0) { hi = x; }
      else { lo = x; }
      const double deriv = 2.0 * kInvSqrtPi * std::exp(-x * x);
      double next = x - f / deriv;
      if (!(next > lo && next < hi)) { next = 0.5 * (lo + hi); }
      if (std::abs(next - x) < 1e-15 * std::max(1.0, std::abs(x)))
      {
         x = next;
         break;
      }
      x = next;
   }
   return x;
}

double trig_model(const Vector &x) { return std::sin(x(0)) * std::cos(x(1)); }

double erf_model(double theta) { return erf_series(theta); }

double circle_model(const Vector &x) { return 12.0 - x(0) * x(0) - x(1) * x(1); }

double four_branch_model(const Vector &x)
{
   const double s = (x(0) + x(1)) / std::numbers::sqrt2;
   const double d = x(0) - x(1);
   const double base = 3.0 + 0.1 * d * d;
   const double lin = 7.0 / std::numbers::sqrt2;
   return std::min({base - s, base + s, d + lin, -d + lin});
}

namespace
{

template <typename BlockCount>
FailureEstimate failure_mc(long n_samples, Exec exec, BlockCount &&count_block)
{
   if (n_samples < 1) { throw std::invalid_argument("estimate_failure_probability: n_samples < 1"); }
   const long n_blocks = (n_samples + kFailureBlock - 1) / kFailureBlock;
   std::vector<long> failures(n_blocks, 0);
   if (exec == Exec::Parallel)
   {
#pragma omp parallel for schedule(dynamic, 1)
      for (long b = 0; b < n_blocks; ++b) { failures[b] = count_block(b); }
   }
   else
   {
      for (long b = 0; b < n_blocks; ++b) { failures[b] = count_block(b); }
   }
   FailureEstimate out;
   out.samples = n_samples;
   for (long f : failures) { out.failures += f; }
   out.probability = double(out.failures) / double(n_samples);
   out.std_error = std::sqrt(out.probability * (1.0 - out.probability) / double(n_samples));
   return out;
}

Matrix normal_block(long b, long n_samples, std::uint64_t seed, int dim)
{
   const long begin = b * kFailureBlock;
   const long len = std::min(kFailureBlock, n_samples - begin);
   Rng rng = make_stream(seed, 0x6670, static_cast<std::uint64_t>(b));
   std::normal_distribution<double> normal(0.0, 1.0);
   Matrix pts(len, dim);
   for (long i = 0; i < len; ++i)
   {
      for (int j = 0; j < dim; ++j) { pts(i, j) = normal(rng); }
   }
   return pts;
}

}  // namespace

FailureEstimate estimate_failure_probability(const ScalarField &state_fn, long n_samples,
                                             std::uint64_t seed, Exec exec, int dim)
{
   return failure_mc(n_samples, exec,
                     [&](long b)
                     {
                        const Matrix pts = normal_block(b, n_samples, seed, dim);
                        long count = 0;
                        for (long i = 0; i < pts.rows(); ++i)
                        {
                           if (state_fn(pts.row(i).transpose()) <= 0.0) { ++count; }
                        }
                        return count;
                     });
}

FailureEstimate estimate_failure_probability(const GpModel &gp, long n_samples,
                                             std::uint64_t seed, Exec exec)
{
   return failure_mc(n_samples, exec,
                     [&](long b)
                     {
                        const Matrix pts = normal_block(b, n_samples, seed, gp.dim());
                        const Vector mean = gp.predict_mean(pts);
                        return static_cast<long>((mean.array() <= 0.0).count());
                     });
}

double rmse(const GpModel &gp, const ScalarField &truth, const Matrix &test_grid)
{
   const Vector mean = gp.predict_mean(test_grid);
   double sse = 0.0;
   for (int i = 0; i < test_grid.rows(); ++i)
   {
      const double r = mean(i) - truth(test_grid.row(i).transpose());
      sse += r * r;
   }
   return std::sqrt(sse / double(test_grid.rows()));
}

namespace
{

// k-th smallest non-zero distance from x to the rows of set, skipping row
// `skip` (or none when skip < 0). Returns 0 when fewer than k remain.
double kth_distance(const Matrix &set, const Eigen::RowVectorXd &x, int k, long skip,
                    std::vector<double> &scratch)
{
   scratch.clear();
   for (long i = 0; i < set.rows(); ++i)
   {
      if (i == skip) { continue; }
      const double d2 = (set.row(i) - x).squaredNorm();
      if (d2 > 0.0) { scratch.push_back(d2); }
   }
   if (static_cast<int>(scratch.size()) < k) { return 0.0; }
   std::nth_element(scratch.begin(), scratch.begin() + (k - 1), scratch.end());
   return std::sqrt(scratch[k - 1]);
}

}  // namespace

double kl_estimate(const Matrix &samples_p, const Matrix &samples_q, int k, Exec exec)
{
   if (samples_p.cols() != samples_q.cols())
   {
      throw DimensionError("kl_estimate: dimension mismatch");
   }
   const long n = samples_p.rows();
   const long m = samples_q.rows();
   if (k < 1 || n <= k || m < k)
   {
      throw std::invalid_argument("kl_estimate: too few samples for k");
   }
   const int d = static_cast<int>(samples_p.cols());
   std::vector<double> terms(n, 0.0);
   std::vector<char> valid(n, 0);
   auto body = [&](long i, std::vector<double> &scratch)
   {
      const Eigen::RowVectorXd x = samples_p.row(i);
      const double rho = kth_distance(samples_p, x, k, i, scratch);
      const double nu = kth_distance(samples_q, x, k, -1, scratch);
      if (rho > 0.0 && nu > 0.0)
      {
         terms[i] = std::log(nu / rho);
         valid[i] = 1;
      }
   };
   if (exec == Exec::Parallel)
   {
#pragma omp parallel
      {
         std::vector<double> scratch;
#pragma omp for schedule(static)
         for (long i = 0; i < n; ++i) { body(i, scratch); }
      }
   }
   else
   {
      std::vector<double> scratch;
      for (long i = 0; i < n; ++i) { body(i, scratch); }
   }
   double sum = 0.0;
   long used = 0;
   for (long i = 0; i < n; ++i)
   {
      if (valid[i])
      {
         sum += terms[i];
         ++used;
      }
   }
   if (used == 0) { throw std::runtime_error("kl_estimate: all samples are duplicates"); }
   return d * sum / double(used) + std::log(double(m) / double(n - 1));
}

std::string metric_name(MetricKind kind)
{
   switch (kind)
   {
   case MetricKind::Rmse: return "rmse";
   case MetricKind::PosteriorKl: return "posterior_kl";
   case MetricKind::FailureProbability: return "failure_probability";
   }
   return "unknown";
}

namespace
{

Box square_box(double lo, double hi)
{
   return Box(Vector::Constant(2, lo), Vector::Constant(2, hi));
}

ProblemSpec make_trig()
{
   ProblemSpec p;
   p.name = "trig";
   p.forward = [](const Vector &x, Rng &) { return trig_model(x); };
   p.truth = trig_model;
   p.domain = square_box(-4.0, 8.0);
   p.poi_kind.variant = PoiVariant::VarianceWeighted;
   p.metric = MetricKind::Rmse;
   p.stopping = {StopKind::RelativeRmseChange, 1e-3, 3};
   p.n_initial = 30;
   p.iterations = 19;
   p.grid_per_axis = 41;
   p.pin_hyperparameters = true;
   p.kernel_init = {KernelFamily::SquaredExponential, 0.25, 2.0, 2.5};
   p.noise_init = 1e-6;
   return p;
}

ProblemSpec make_erf()
{
   ProblemSpec p;
   p.name = "erf";
   constexpr double y_obs = 0.6927;
   constexpr double sigma = 0.1;
   // Noise enters inside the argument; the design loop queries the
   // noise-free simulator and carries the noise in the likelihood.
   p.forward = [](const Vector &x, Rng &) { return erf_model(x(0)); };
   p.truth = [](const Vector &x) { return erf_model(x(0)); };
   p.domain = Box(Vector::Constant(1, 0.0), Vector::Constant(1, 1.0));
   p.noise_std = sigma;
   const double theta_hat = erf_inverse(y_obs);
   const double slope = 2.0 * kInvSqrtPi * std::exp(-theta_hat * theta_hat);
   p.poi_kind.variant = PoiVariant::PosteriorGivenY0;
   p.poi_kind.y0 = y_obs;
   p.poi_kind.lik_variance = (sigma * slope) * (sigma * slope);
   p.metric = MetricKind::PosteriorKl;
   p.stopping = {StopKind::PosteriorMeanShift, 1e-3, 3};
   p.n_initial = 1;
   p.iterations = 8;
   p.grid_per_axis = 101;
   p.kernel_init = {KernelFamily::SquaredExponential, 0.25, 0.3, 2.5};
   p.noise_init = 1e-8;
   // y* = erf(theta + eps) gives theta | y* ~ N(erfinv(y*), sigma^2) on the box.
   p.true_log_posterior = [theta_hat, sigma](const Vector &x)
   {
      if (x(0) < 0.0 || x(0) > 1.0) { return -std::numeric_limits<double>::infinity(); }
      const double r = (x(0) - theta_hat) / sigma;
      return -0.5 * r * r;
   };
   p.posterior_mcmc.n_samples = 2000;
   p.posterior_mcmc.burn_in = 500;
   p.posterior_mcmc.thin = 5;
   p.posterior_mcmc.seed = 0x657266;
   return p;
}

ProblemSpec make_kdv()
{
   ProblemSpec p;
   p.name = "kdv";
   auto setup = std::make_shared<KdvSetup>(default_kdv_setup());
   generate_observations(*setup);
   // Divergent solves are reported as a large finite misfit so the GP stays
   // well posed.
   static constexpr double ceiling = 10.0;
   auto observable = [setup](const Vector &x)
   {
      const double v = kdv_observable({x(0), x(1)}, *setup);
      return std::isfinite(v) ? std::min(v, ceiling) : ceiling;
   };
   p.forward = [observable](const Vector &x, Rng &) { return observable(x); };
   p.truth = observable;
   p.domain = Box((Vector(2) << 3.0, 0.01).finished(), (Vector(2) << 12.0, 4.0).finished());
   const double floor_mse = setup->obs_noise_std * setup->obs_noise_std;
   p.noise_std = setup->obs_noise_std;
   p.poi_kind.variant = PoiVariant::PosteriorGivenY0;
   p.poi_kind.y0 = floor_mse;
   p.poi_kind.lik_variance = floor_mse;
   p.metric = MetricKind::PosteriorKl;
   p.stopping = {StopKind::PosteriorMeanShift, 1e-3, 3};
   p.n_initial = 10;
   p.iterations = 8;
   p.grid_per_axis = 41;
   p.kernel_init = {KernelFamily::SquaredExponential, 0.1, 1.5, 2.5};
   p.noise_init = 1e-4;
   p.true_log_posterior = [observable, floor_mse](const Vector &x)
   {
      const double r = observable(x) - floor_mse;
      return -0.5 * r * r / floor_mse;
   };
   p.posterior_mcmc.n_samples = 1000;
   p.posterior_mcmc.burn_in = 400;
   p.posterior_mcmc.thin = 2;
   p.posterior_mcmc.proposal_scale = 2e-3;
   p.posterior_mcmc.seed = 0x6b6476;
   // The posterior is a narrow basin around the generating parameters; chains
   // start there instead of searching the box.
   p.posterior_mcmc.initial_points =
      (Matrix(1, 2) << setup->theta_true[0], setup->theta_true[1]).finished();
   return p;
}

ProblemSpec make_circle()
{
   ProblemSpec p;
   p.name = "circle";
   p.forward = [](const Vector &x, Rng &) { return circle_model(x); };
   p.truth = circle_model;
   p.domain = square_box(-10.0, 10.0);
   p.poi_kind.variant = PoiVariant::LimitState;
   p.poi_kind.lambda = 0.0;  // 0: recomputed from the GP every iteration
   p.metric = MetricKind::FailureProbability;
   p.stopping = {StopKind::FailureProbabilityChange, 1e-3, 3};
   p.n_initial = 10;
   p.iterations = 45;
   p.grid_per_axis = 41;
   p.kernel_init = {KernelFamily::SquaredExponential, 100.0, 5.0, 2.5};
   p.noise_init = 1e-6;
   p.ground_truth = 0.002460;
   return p;
}

ProblemSpec make_four_branch(int n_initial, int iterations, const std::string &name)
{
   ProblemSpec p;
   p.name = name;
   p.forward = [](const Vector &x, Rng &) { return four_branch_model(x); };
   p.truth = four_branch_model;
   p.domain = square_box(-10.0, 10.0);
   p.poi_kind.variant = PoiVariant::LimitState;
   p.poi_kind.lambda = 0.0;
   p.metric = MetricKind::FailureProbability;
   p.stopping = {StopKind::FailureProbabilityChange, 1e-3, 3};
   p.n_initial = n_initial;
   p.iterations = iterations;
   p.grid_per_axis = 41;
   p.kernel_init = {KernelFamily::SquaredExponential, 10.0, 3.0, 2.5};
   p.noise_init = 1e-6;
   p.ground_truth = 0.00225;
   return p;
}

}  // namespace

std::vector<std::string> problem_names()
{
   return {"trig", "erf", "kdv", "circle", "four_branch", "four_branch_110"};
}

ProblemSpec make_problem(const std::string &name)
{
   if (name == "trig") { return make_trig(); }
   if (name == "erf") { return make_erf(); }
   if (name == "kdv") { return make_kdv(); }
   if (name == "circle") { return make_circle(); }
   if (name == "four_branch") { return make_four_branch(20, 30, name); }
   if (name == "four_branch_110") { return make_four_branch(50, 60, name); }
   throw std::invalid_argument("unknown problem: " + name);
}

}  // namespace accboed
