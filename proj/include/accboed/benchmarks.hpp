// Copyright 2026 The accboed Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef ACCBOED_BENCHMARKS_HPP
#define ACCBOED_BENCHMARKS_HPP

#include "accboed/common.hpp"
#include "accboed/gp.hpp"
#include "accboed/poi.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace accboed
{

// Forward models.
double trig_model(const Vector &x);        // sin(x1) cos(x2)
double erf_model(double theta);            // series / continued fraction
double circle_model(const Vector &x);      // 12 - x1^2 - x2^2
double four_branch_model(const Vector &x);

// Error function to ~1e-13: Maclaurin series for |x| < 2.5, Lentz continued
// fraction for erfc beyond.
double erf_series(double x);
double erf_inverse(double y);

using ScalarField = std::function<double(const Vector &)>;

struct FailureEstimate
{
   double probability = 0.0;
   double std_error = 0.0;
   long failures = 0;
   long samples = 0;
};

// Fraction of iid N(0, I_2) draws with state_fn <= 0. Draws are generated in
// fixed blocks with per-block streams, so serial and parallel runs agree.
FailureEstimate estimate_failure_probability(const ScalarField &state_fn, long n_samples,
                                             std::uint64_t seed, Exec exec = Exec::Parallel,
                                             int dim = 2);

// Same draws, but the state function is the GP predictive mean.
FailureEstimate estimate_failure_probability(const GpModel &gp, long n_samples,
                                             std::uint64_t seed, Exec exec = Exec::Parallel);

double rmse(const GpModel &gp, const ScalarField &truth, const Matrix &test_grid);

// k-nearest-neighbour estimate of KL(p || q) from samples (rows). Exact
// duplicates of a p-point in q are ignored when searching q.
double kl_estimate(const Matrix &samples_p, const Matrix &samples_q, int k = 5,
                   Exec exec = Exec::Parallel);

enum class MetricKind
{
   Rmse,
   PosteriorKl,
   FailureProbability
};

std::string metric_name(MetricKind kind);

enum class StopKind
{
   None,
   RelativeRmseChange,
   PosteriorMeanShift,
   FailureProbabilityChange
};

struct StoppingRule
{
   StopKind kind = StopKind::None;
   double eps_z = 0.0;
   int patience = 3;
};

struct ProblemSpec
{
   std::string name;
   // Simulator; may draw noise from the stream.
   std::function<double(const Vector &, Rng &)> forward;
   // Noise-free response, used for metrics.
   ScalarField truth;
   Box domain;
   PoiKind poi_kind;
   MetricKind metric = MetricKind::Rmse;
   double noise_std = 0.0;
   StoppingRule stopping;

   int n_initial = 10;
   int iterations = 10;
   int grid_per_axis = 41;
   bool pin_hyperparameters = false;
   KernelSpec kernel_init;
   double noise_init = 1e-6;

   // Failure problems.
   std::optional<double> ground_truth;
   long failure_samples = 1000000;
   std::uint64_t failure_seed = 20240601;

   // Posterior problems: the exact log posterior and its sampler settings.
   std::function<double(const Vector &)> true_log_posterior;
   McmcConfig posterior_mcmc;
};

std::vector<std::string> problem_names();
ProblemSpec make_problem(const std::string &name);

}  // namespace accboed

#endif  // ACCBOED_BENCHMARKS_HPP
