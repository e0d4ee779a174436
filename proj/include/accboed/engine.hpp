// Copyright 2026 The accboed Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef ACCBOED_ENGINE_HPP
#define ACCBOED_ENGINE_HPP

#include "accboed/benchmarks.hpp"
#include "accboed/common.hpp"
#include "accboed/density_ratio.hpp"
#include "accboed/gp.hpp"
#include "accboed/kmn.hpp"
#include "accboed/poi.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace accboed
{

enum class Method
{
   AccBoed,
   BasicBoed,
   Random,
   Lhs
};

std::string method_name(Method m);
Method parse_method(const std::string &name);

struct AccBoedConfig
{
   // Negative selects 0.05 x the fitted signal variance.
   double eps_cov = -1.0;
   bool use_filter = true;
   int n_z = 40;
   int n_d = 25;
   int big_n_z = 200;
   // y draws per (design, z) pair in both estimators.
   int n_y = 16;
   // Empty selects a uniform grid with grid_per_axis points per axis
   // (<= 0: the problem's default).
   Matrix candidate_grid;
   int grid_per_axis = 0;
   // Negative selects the problem's iteration count.
   int max_iterations = -1;
   bool enable_stopping = false;
   // Divide the KMN density by its expectation under p(y | d).
   bool normalize_ratio = true;
   // Train the KMN on (y - m(d)) / s(d) with m, s the GP predictive at the
   // design; densities are mapped back with the Jacobian.
   bool standardize_targets = true;
   std::uint64_t seed = 0;
   Exec exec = Exec::Parallel;
   KmnConfig kmn;
   McmcConfig mcmc;
   // Iteration-zero records for every method and the posterior metric
   // sampler draw on this many samples (<= 0: the problem's setting).
   int posterior_samples = 0;

   void validate() const;
};

struct UtilityEstimate
{
   double value = 0.0;
   double std_error = 0.0;
   int n_pairs = 0;
};

// Density ratio r(y) = p(y | d, z) / p(y | d) used inside the accelerated
// estimator. Implementations must be safe for concurrent calls.
class RatioModel
{
public:
   virtual ~RatioModel() = default;
   // out(j, s) = r(y(j, s)) for the pair (design, row j of z_rows). marginal
   // is p(y | design).
   virtual void evaluate(const Vector &design, const Matrix &z_rows, const Matrix &y,
                         const ScalarGaussian &marginal, Matrix &out) const = 0;
};

class ConstantRatio final : public RatioModel
{
public:
   explicit ConstantRatio(double value = 1.0) : value_(value) {}
   void evaluate(const Vector &, const Matrix &z_rows, const Matrix &y, const ScalarGaussian &,
                 Matrix &out) const override;

private:
   double value_;
};

class FunctionRatio final : public RatioModel
{
public:
   using Fn = std::function<double(double y, const Vector &design, const Vector &z)>;
   explicit FunctionRatio(Fn fn) : fn_(std::move(fn)) {}
   void evaluate(const Vector &design, const Matrix &z_rows, const Matrix &y,
                 const ScalarGaussian &, Matrix &out) const override;

private:
   Fn fn_;
};

// Trained KMN. With normalize set, q is divided by its closed-form
// expectation under the marginal, so that E[r] = 1 holds exactly. With
// standardized set, the model was trained on (y - m) / s for the marginal
// N(m, s^2) at the design.
class KmnRatio final : public RatioModel
{
public:
   KmnRatio(const KmnModel &model, bool normalize, bool standardized = false)
      : model_(model), normalize_(normalize), standardized_(standardized)
   {
   }
   void evaluate(const Vector &design, const Matrix &z_rows, const Matrix &y,
                 const ScalarGaussian &marginal, Matrix &out) const override;

private:
   const KmnModel &model_;
   bool normalize_;
   bool standardized_;
};

// Rewrites record targets as (y - m(d)) / s(d) under the GP observation
// predictive at each record's design.
void standardize_records(const GpModel &gp, std::vector<CdeRecord> &records);

// Predictive density of an observation at x (latent variance plus noise).
ScalarGaussian observation_predictive(const GpModel &gp, const Vector &x);

double resolve_eps_cov(const AccBoedConfig &cfg, const GpModel &gp);

// Candidates with |posterior covariance| with z at least eps_cov.
std::vector<int> informative_region(const GpModel &gp, const Vector &z, const Matrix &candidates,
                                    double eps_cov);

// Pool rows with |posterior covariance| with the design above eps_cov.
std::vector<int> select_informative_samples(const GpModel &gp, const Vector &design,
                                            const Matrix &z_pool, double eps_cov);

// Throws InsufficientData when fewer than min_records usable records result.
std::vector<CdeRecord> build_cde_dataset(const GpModel &gp, const Matrix &poi_samples,
                                         const Matrix &candidates, const AccBoedConfig &cfg,
                                         double eps_cov, Rng &rng, int min_records = 0);

UtilityEstimate estimate_utility_acc(const Vector &design, const GpModel &gp,
                                     const RatioModel &ratio, const Matrix &z_pool,
                                     const AccBoedConfig &cfg, double eps_cov, Rng &rng);

UtilityEstimate estimate_utility_basic(const Vector &design, const GpModel &gp,
                                       const Matrix &z_pool, int n_y, Rng &rng);

struct UtilitySurface
{
   std::vector<UtilityEstimate> estimates;
   Vector values() const;
};

// Sweeps over every candidate. Candidate i draws from the stream
// (seed, iteration, i), so Serial and Parallel give identical surfaces.
UtilitySurface sweep_utility_acc(const GpModel &gp, const RatioModel &ratio,
                                 const Matrix &z_pool, const Matrix &candidates,
                                 const AccBoedConfig &cfg, double eps_cov, int iteration,
                                 Exec exec);

UtilitySurface sweep_utility_basic(const GpModel &gp, const Matrix &z_pool,
                                   const Matrix &candidates, const AccBoedConfig &cfg,
                                   int iteration, Exec exec);

struct DesignArgmax
{
   int index = 0;
   double value = 0.0;
   bool uninformative = false;
};

// Lowest index wins ties; all-equal values are flagged.
DesignArgmax optimize_design(const Vector &utility_values);

struct DesignChoice
{
   Vector design;
   int index = 0;
   double utility = 0.0;
   bool uninformative = false;
   double eps_cov = 0.0;
   int cde_records = 0;
   KmnTrainingLog kmn_log;
   double t_cde_s = 0.0;
   double t_train_s = 0.0;
   double t_sweep_s = 0.0;
   UtilitySurface surface;
};

// One design-selection step on a frozen GP and PoI pool.
DesignChoice select_design(const GpModel &gp, const Matrix &candidates, const Matrix &z_pool,
                           const AccBoedConfig &cfg, Method method, int iteration);

struct RunRecord
{
   int iteration = 0;
   Vector chosen_design;  // empty for the initialization record
   double utility_at_choice = 0.0;
   bool uninformative = false;
   int dataset_size = 0;
   std::string metric_name;
   double metric_value = 0.0;
   double wall_time_utility = 0.0;
   double wall_time_total = 0.0;
};

struct RunResult
{
   std::string problem;
   Method method = Method::AccBoed;
   std::vector<RunRecord> records;
   bool ok = true;
   std::string error;
   Dataset data;
   KernelSpec kernel;
   double noise_variance = 0.0;
   // Posterior problems: approximate posterior samples after initialization
   // and after the last iteration.
   Matrix initial_posterior;
   Matrix final_posterior;
};

// Initial design shared by every method for a given seed.
Matrix initial_design(const ProblemSpec &problem, std::uint64_t seed);

Matrix resolve_candidates(const ProblemSpec &problem, const AccBoedConfig &cfg);

// Resolves an automatic LimitState bandwidth against the current GP.
PoiKind resolve_poi_kind(const PoiKind &kind, const GpModel &gp, const Box &domain);

// Exact-posterior samples for posterior problems, cached per problem name.
const Matrix &true_posterior_samples(const ProblemSpec &problem);

// Samples from the surrogate posterior of a posterior problem.
SampleSet surrogate_posterior(const ProblemSpec &problem, const GpModel &gp, std::uint64_t seed,
                              int n_samples = 0);

// Problem metric for the current GP.
double evaluate_metric(const ProblemSpec &problem, const GpModel &gp, std::uint64_t seed,
                       const AccBoedConfig &cfg, Matrix *posterior = nullptr);

// GP fitted on the shared initial design (or on n_train LHS points when
// positive) plus the iteration-one PoI pool; the state a single
// design-selection step sees.
struct FrozenState
{
   GpModel gp;
   Matrix candidates;
   Matrix pool;
};
FrozenState frozen_state(const ProblemSpec &problem, const AccBoedConfig &cfg, int n_train = 0);

// The sequential loop for AccBoed or BasicBoed. Stage errors stop the loop and
// are reported in the result alongside the records produced so far.
RunResult acc_boed_run(const ProblemSpec &problem, const AccBoedConfig &cfg,
                       Method method = Method::AccBoed);

// Random (nested) or Lhs (fresh design per size) baseline; one record per size.
RunResult baseline_run(const ProblemSpec &problem, Method scheme, const std::vector<int> &sizes,
                       const AccBoedConfig &cfg);

// Dispatches on method; baselines use the sizes the sequential loop visits.
RunResult run_method(const ProblemSpec &problem, const AccBoedConfig &cfg, Method method);

void write_records_csv(const std::vector<RunRecord> &records, int design_dim, std::ostream &out,
                       bool include_timing = true);

}  // namespace accboed

#endif  // ACCBOED_ENGINE_HPP
