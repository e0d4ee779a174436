// Copyright 2026 The accboed Authors
// SPDX-License-Identifier: Apache-2.0

#include "accboed/engine.hpp"

#include "accboed/sampling.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace accboed
{

namespace
{

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
   return std::chrono::duration<double>(Clock::now() - start).count();
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Stream tags.
constexpr std::uint64_t kTagInit = 0x696e6974;
constexpr std::uint64_t kTagSim = 0x73696d;
constexpr std::uint64_t kTagFit = 0x666974;
constexpr std::uint64_t kTagPoi = 0x706f69;
constexpr std::uint64_t kTagCde = 0x636465;
constexpr std::uint64_t kTagKmn = 0x6b6d6e;
constexpr std::uint64_t kTagMetric = 0x6d6574;
constexpr std::uint64_t kTagUtility = 0x757469;
constexpr std::uint64_t kTagRandom = 0x726e64;
constexpr std::uint64_t kTagLhs = 0x6c6873;

// n standard-normal draws, one per equal-probability stratum (plain draws when
// n = 1).
void stratified_normals(Rng &rng, int n, double *out)
{
   std::uniform_real_distribution<double> unit(0.0, 1.0);
   for (int s = 0; s < n; ++s)
   {
      double p = (s + unit(rng)) / n;
      p = std::clamp(p, 1e-300, 1.0 - 1e-16);
      out[s] = std::numbers::sqrt2 * boost::math::erf_inv(2.0 * p - 1.0);
   }
}

UtilityEstimate summarize_terms(const std::vector<double> &terms)
{
   UtilityEstimate out;
   out.n_pairs = static_cast<int>(terms.size());
   if (terms.empty()) { return out; }
   double sum = 0.0;
   for (double t : terms) { sum += t; }
   const double mean = sum / double(terms.size());
   if (terms.size() > 1)
   {
      double ss = 0.0;
      for (double t : terms) { ss += (t - mean) * (t - mean); }
      out.std_error = std::sqrt(ss / double(terms.size() - 1) / double(terms.size()));
   }
   out.value = mean;
   return out;
}

// Accelerated estimate for one design given its covariance with every pool
// row. All y draws are consumed before filtering, so the filter never shifts
// the random stream.
UtilityEstimate acc_from_covariance(const Vector &design, const ScalarGaussian &marginal,
                                    const Eigen::Ref<const Eigen::RowVectorXd> &cov_row,
                                    const RatioModel &ratio, const Matrix &z_pool, int n_y,
                                    bool use_filter, double eps_cov, Rng &rng)
{
   const int pool = static_cast<int>(z_pool.rows());
   const double sd = std::sqrt(marginal.variance);
   Matrix eps(n_y, pool);
   for (int j = 0; j < pool; ++j) { stratified_normals(rng, n_y, eps.col(j).data()); }
   const Matrix y = (marginal.mean + sd * eps.transpose().array()).matrix();

   std::vector<int> keep;
   keep.reserve(pool);
   for (int j = 0; j < pool; ++j)
   {
      if (!use_filter || std::abs(cov_row(j)) > eps_cov) { keep.push_back(j); }
   }
   std::vector<double> terms(pool, 0.0);
   if (!keep.empty())
   {
      Matrix zs(keep.size(), z_pool.cols());
      Matrix ys(keep.size(), n_y);
      for (std::size_t k = 0; k < keep.size(); ++k)
      {
         zs.row(k) = z_pool.row(keep[k]);
         ys.row(k) = y.row(keep[k]);
      }
      Matrix r;
      ratio.evaluate(design, zs, ys, marginal, r);
      for (std::size_t k = 0; k < keep.size(); ++k)
      {
         double t = 0.0;
         for (int s = 0; s < n_y; ++s)
         {
            const double v = r(k, s);
            if (v > 0.0) { t += v * std::log(v); }
         }
         terms[keep[k]] = t / n_y;
      }
   }
   return summarize_terms(terms);
}

UtilityEstimate basic_with_pool_predictive(const Vector &design, const GpModel &gp,
                                           const Matrix &z_pool, const Vector &z_mean,
                                           const Vector &z_var, int n_y, Rng &rng)
{
   const ScalarGaussian marginal = observation_predictive(gp, design);
   const double noise = gp.noise_variance();
   const Matrix query = design.transpose();
   std::vector<double> terms(z_pool.rows(), 0.0);
   std::vector<double> eps(n_y);
   for (int j = 0; j < z_pool.rows(); ++j)
   {
      const Vector z = z_pool.row(j).transpose();
      const double sd = std::sqrt(z_var(j) + noise);
      stratified_normals(rng, n_y, eps.data());
      double t = 0.0;
      for (int s = 0; s < n_y; ++s)
      {
         const double yz = z_mean(j) + sd * eps[s];
         const GaussianPrediction c = predict_constrained(gp, query, z, yz);
         const ScalarGaussian constrained{c.mean(0), c.covariance(0, 0) + noise};
         t += gaussian_kl(constrained, marginal);
      }
      terms[j] = t / n_y;
   }
   return summarize_terms(terms);
}

std::vector<int> threshold_indices(const Eigen::Ref<const Vector> &cov, double eps, bool strict)
{
   std::vector<int> out;
   for (int i = 0; i < cov.size(); ++i)
   {
      const double a = std::abs(cov(i));
      if (strict ? a > eps : a >= eps) { out.push_back(i); }
   }
   return out;
}

}  // namespace

std::string method_name(Method m)
{
   switch (m)
   {
   case Method::AccBoed: return "acc_boed";
   case Method::BasicBoed: return "basic_boed";
   case Method::Random: return "random";
   case Method::Lhs: return "lhs";
   }
   return "unknown";
}

Method parse_method(const std::string &name)
{
   if (name == "acc_boed" || name == "acc") { return Method::AccBoed; }
   if (name == "basic_boed" || name == "basic") { return Method::BasicBoed; }
   if (name == "random") { return Method::Random; }
   if (name == "lhs") { return Method::Lhs; }
   throw std::invalid_argument("unknown method: " + name);
}

void AccBoedConfig::validate() const
{
   if (n_z < 1 || n_d < 1 || big_n_z < 1 || n_y < 1)
   {
      throw std::invalid_argument("AccBoedConfig: sample counts must be positive");
   }
   if (n_z > big_n_z) { throw std::invalid_argument("AccBoedConfig: n_z exceeds big_n_z"); }
   if (candidate_grid.size() == 0 && grid_per_axis == 1)
   {
      throw std::invalid_argument("AccBoedConfig: grid_per_axis must be >= 2");
   }
   kmn.validate();
   mcmc.validate();
}

void ConstantRatio::evaluate(const Vector &, const Matrix &z_rows, const Matrix &y,
                             const ScalarGaussian &, Matrix &out) const
{
   out = Matrix::Constant(z_rows.rows(), y.cols(), value_);
}

void FunctionRatio::evaluate(const Vector &design, const Matrix &z_rows, const Matrix &y,
                             const ScalarGaussian &, Matrix &out) const
{
   out.resize(z_rows.rows(), y.cols());
   for (int j = 0; j < z_rows.rows(); ++j)
   {
      const Vector z = z_rows.row(j).transpose();
      for (int s = 0; s < y.cols(); ++s) { out(j, s) = fn_(y(j, s), design, z); }
   }
}

void KmnRatio::evaluate(const Vector &design, const Matrix &z_rows, const Matrix &y,
                        const ScalarGaussian &marginal, Matrix &out) const
{
   const Matrix w = model_.weights_for_design(design, z_rows);
   const KernelBank &bank = model_.bank();
   // Model coordinates: u = (y - shift) / scale, density q_y = q_u / scale.
   const double shift = standardized_ ? marginal.mean : 0.0;
   const double scale = standardized_ ? std::sqrt(marginal.variance) : 1.0;
   const ScalarGaussian marginal_u{(marginal.mean - shift) / scale,
                                   marginal.variance / (scale * scale)};
   Vector expect_factor;
   if (normalize_)
   {
      // E_{N(m, s)}[N(u | mu_i, h_i^2)] = N(mu_i | m, h_i^2 + s).
      expect_factor.resize(bank.means.size());
      for (int i = 0; i < bank.means.size(); ++i)
      {
         const double v = bank.bandwidths(i) * bank.bandwidths(i) + marginal_u.variance;
         expect_factor(i) = ScalarGaussian{marginal_u.mean, v}.pdf(bank.means(i));
      }
   }
   out.resize(z_rows.rows(), y.cols());
   for (int j = 0; j < z_rows.rows(); ++j)
   {
      // The Jacobian cancels in the normalized ratio.
      const double e = normalize_ ? w.col(j).dot(expect_factor) : scale;
      for (int s = 0; s < y.cols(); ++s)
      {
         const double q = model_.mixture_density(w.col(j), (y(j, s) - shift) / scale);
         out(j, s) = e > 0.0 ? q / e : 0.0;
      }
   }
}

void standardize_records(const GpModel &gp, std::vector<CdeRecord> &records)
{
   if (records.empty()) { return; }
   Matrix designs(records.size(), records.front().design.size());
   for (std::size_t i = 0; i < records.size(); ++i) { designs.row(i) = records[i].design; }
   Vector mean, var;
   gp.predict_marginal(designs, mean, var);
   for (std::size_t i = 0; i < records.size(); ++i)
   {
      const double sd = std::sqrt(var(i) + gp.noise_variance());
      records[i].y_sample = (records[i].y_sample - mean(i)) / sd;
   }
}

ScalarGaussian observation_predictive(const GpModel &gp, const Vector &x)
{
   Vector mean, var;
   gp.predict_marginal(Matrix(x.transpose()), mean, var);
   return {mean(0), var(0) + gp.noise_variance()};
}

double resolve_eps_cov(const AccBoedConfig &cfg, const GpModel &gp)
{
   return cfg.eps_cov >= 0.0 ? cfg.eps_cov : 0.05 * gp.kernel().signal_variance;
}

std::vector<int> informative_region(const GpModel &gp, const Vector &z, const Matrix &candidates,
                                    double eps_cov)
{
   const Matrix cov = posterior_cov_matrix(gp, candidates, Matrix(z.transpose()));
   return threshold_indices(cov.col(0), eps_cov, false);
}

std::vector<int> select_informative_samples(const GpModel &gp, const Vector &design,
                                            const Matrix &z_pool, double eps_cov)
{
   const Matrix cov = posterior_cov_matrix(gp, z_pool, Matrix(design.transpose()));
   return threshold_indices(cov.col(0), eps_cov, true);
}

std::vector<CdeRecord> build_cde_dataset(const GpModel &gp, const Matrix &poi_samples,
                                         const Matrix &candidates, const AccBoedConfig &cfg,
                                         double eps_cov, Rng &rng, int min_records)
{
   if (poi_samples.rows() == 0) { throw std::invalid_argument("build_cde_dataset: no PoI samples"); }
   const int pool = static_cast<int>(poi_samples.rows());
   std::vector<int> order(pool);
   std::iota(order.begin(), order.end(), 0);
   const int n_z = std::min(cfg.n_z, pool);
   for (int i = 0; i < n_z; ++i)
   {
      std::uniform_int_distribution<int> pick(i, pool - 1);
      std::swap(order[i], order[pick(rng)]);
   }
   Matrix zsel(n_z, poi_samples.cols());
   for (int i = 0; i < n_z; ++i) { zsel.row(i) = poi_samples.row(order[i]); }

   const Matrix cov = posterior_cov_matrix(gp, candidates, zsel);
   Vector cand_mean, cand_var, z_mean, z_var;
   gp.predict_marginal(candidates, cand_mean, cand_var);
   gp.predict_marginal(zsel, z_mean, z_var);
   const double noise = gp.noise_variance();

   std::normal_distribution<double> normal(0.0, 1.0);
   std::vector<CdeRecord> records;
   records.reserve(static_cast<std::size_t>(n_z) * cfg.n_d);
   for (int i = 0; i < n_z; ++i)
   {
      std::vector<int> region = threshold_indices(cov.col(i), eps_cov, false);
      if (region.empty()) { continue; }
      const int take = std::min<int>(cfg.n_d, static_cast<int>(region.size()));
      for (int k = 0; k < take; ++k)
      {
         std::uniform_int_distribution<int> pick(k, static_cast<int>(region.size()) - 1);
         std::swap(region[k], region[pick(rng)]);
      }
      const Vector z = zsel.row(i).transpose();
      const double yz = z_mean(i) + std::sqrt(z_var(i) + noise) * normal(rng);
      for (int k = 0; k < take; ++k)
      {
         const int c = region[k];
         const ScalarGaussian den{cand_mean(c), cand_var(c) + noise};
         const GaussianPrediction pc =
            predict_constrained(gp, candidates.row(c), z, yz);
         const ScalarGaussian num{pc.mean(0), pc.covariance(0, 0) + noise};
         RatioGaussian ratio;
         try
         {
            ratio = gaussian_ratio(num, den);
         }
         catch (const DegenerateRatio &)
         {
            continue;
         }
         CdeRecord rec;
         rec.design = candidates.row(c).transpose();
         rec.poi_point = z;
         rec.y_sample = ratio.mean + std::sqrt(ratio.variance) * normal(rng);
         records.push_back(std::move(rec));
      }
   }
   if (static_cast<int>(records.size()) < min_records)
   {
      throw InsufficientData("build_cde_dataset: " + std::to_string(records.size()) +
                             " usable records, need " + std::to_string(min_records));
   }
   return records;
}

UtilityEstimate estimate_utility_acc(const Vector &design, const GpModel &gp,
                                     const RatioModel &ratio, const Matrix &z_pool,
                                     const AccBoedConfig &cfg, double eps_cov, Rng &rng)
{
   const ScalarGaussian marginal = observation_predictive(gp, design);
   const Matrix cov = posterior_cov_matrix(gp, Matrix(design.transpose()), z_pool);
   return acc_from_covariance(design, marginal, cov.row(0), ratio, z_pool, cfg.n_y,
                              cfg.use_filter, eps_cov, rng);
}

UtilityEstimate estimate_utility_basic(const Vector &design, const GpModel &gp,
                                       const Matrix &z_pool, int n_y, Rng &rng)
{
   Vector z_mean, z_var;
   gp.predict_marginal(z_pool, z_mean, z_var);
   return basic_with_pool_predictive(design, gp, z_pool, z_mean, z_var, n_y, rng);
}

Vector UtilitySurface::values() const
{
   Vector v(estimates.size());
   for (std::size_t i = 0; i < estimates.size(); ++i) { v(i) = estimates[i].value; }
   return v;
}

UtilitySurface sweep_utility_acc(const GpModel &gp, const RatioModel &ratio,
                                 const Matrix &z_pool, const Matrix &candidates,
                                 const AccBoedConfig &cfg, double eps_cov, int iteration,
                                 Exec exec)
{
   const int m = static_cast<int>(candidates.rows());
   Vector mean, var;
   gp.predict_marginal(candidates, mean, var);
   const Matrix cov = posterior_cov_matrix(gp, candidates, z_pool);
   UtilitySurface out;
   out.estimates.resize(m);
   auto body = [&](int i)
   {
      Rng rng = make_stream(cfg.seed, kTagUtility + static_cast<std::uint64_t>(iteration),
                            static_cast<std::uint64_t>(i));
      const ScalarGaussian marginal{mean(i), var(i) + gp.noise_variance()};
      out.estimates[i] = acc_from_covariance(candidates.row(i).transpose(), marginal,
                                             cov.row(i), ratio, z_pool, cfg.n_y,
                                             cfg.use_filter, eps_cov, rng);
   };
   if (exec == Exec::Parallel)
   {
#pragma omp parallel for schedule(dynamic, 8)
      for (int i = 0; i < m; ++i) { body(i); }
   }
   else
   {
      for (int i = 0; i < m; ++i) { body(i); }
   }
   return out;
}

UtilitySurface sweep_utility_basic(const GpModel &gp, const Matrix &z_pool,
                                   const Matrix &candidates, const AccBoedConfig &cfg,
                                   int iteration, Exec exec)
{
   const int m = static_cast<int>(candidates.rows());
   Vector z_mean, z_var;
   gp.predict_marginal(z_pool, z_mean, z_var);
   UtilitySurface out;
   out.estimates.resize(m);
   auto body = [&](int i)
   {
      Rng rng = make_stream(cfg.seed, kTagUtility + static_cast<std::uint64_t>(iteration),
                            static_cast<std::uint64_t>(i));
      out.estimates[i] = basic_with_pool_predictive(candidates.row(i).transpose(), gp, z_pool,
                                                    z_mean, z_var, cfg.n_y, rng);
   };
   if (exec == Exec::Parallel)
   {
#pragma omp parallel for schedule(dynamic, 8)
      for (int i = 0; i < m; ++i) { body(i); }
   }
   else
   {
      for (int i = 0; i < m; ++i) { body(i); }
   }
   return out;
}

DesignArgmax optimize_design(const Vector &utility_values)
{
   if (utility_values.size() == 0) { throw std::invalid_argument("optimize_design: empty grid"); }
   DesignArgmax out;
   out.value = utility_values(0);
   bool all_equal = true;
   for (int i = 1; i < utility_values.size(); ++i)
   {
      if (utility_values(i) != utility_values(0)) { all_equal = false; }
      if (utility_values(i) > out.value)
      {
         out.value = utility_values(i);
         out.index = i;
      }
   }
   out.uninformative = all_equal;
   return out;
}

DesignChoice select_design(const GpModel &gp, const Matrix &candidates, const Matrix &z_pool,
                           const AccBoedConfig &cfg, Method method, int iteration)
{
   DesignChoice ch;
   ch.eps_cov = resolve_eps_cov(cfg, gp);
   if (method == Method::AccBoed)
   {
      const auto t0 = Clock::now();
      const int min_records = 10 * cfg.kmn.n_centers;
      std::vector<CdeRecord> records;
      // Relax the threshold by 10x at a time; past the last relaxation no
      // design is informative about the pool and every pair contributes zero.
      constexpr int kMaxRelaxations = 4;
      for (int attempt = 0;; ++attempt)
      {
         try
         {
            Rng rng = make_stream(cfg.seed, kTagCde + static_cast<std::uint64_t>(attempt),
                                  static_cast<std::uint64_t>(iteration));
            records = build_cde_dataset(gp, z_pool, candidates, cfg, ch.eps_cov, rng, min_records);
            break;
         }
         catch (const InsufficientData &)
         {
            if (attempt == kMaxRelaxations)
            {
               ch.surface.estimates.assign(candidates.rows(), UtilityEstimate{});
               ch.t_cde_s = seconds_since(t0);
               ch.uninformative = true;
               ch.design = candidates.row(0).transpose();
               return ch;
            }
            ch.eps_cov *= 0.1;
         }
      }
      ch.cde_records = static_cast<int>(records.size());
      if (cfg.standardize_targets) { standardize_records(gp, records); }
      ch.t_cde_s = seconds_since(t0);

      const auto t1 = Clock::now();
      KmnConfig kc = cfg.kmn;
      kc.seed = mix_seed(cfg.seed, kTagKmn, static_cast<std::uint64_t>(iteration));
      const KmnModel model = train_kmn(records, kc, &ch.kmn_log);
      ch.t_train_s = seconds_since(t1);

      const auto t2 = Clock::now();
      const KmnRatio ratio(model, cfg.normalize_ratio, cfg.standardize_targets);
      ch.surface = sweep_utility_acc(gp, ratio, z_pool, candidates, cfg, ch.eps_cov, iteration,
                                     cfg.exec);
      ch.t_sweep_s = seconds_since(t2);
   }
   else if (method == Method::BasicBoed)
   {
      const auto t2 = Clock::now();
      ch.surface = sweep_utility_basic(gp, z_pool, candidates, cfg, iteration, cfg.exec);
      ch.t_sweep_s = seconds_since(t2);
   }
   else
   {
      throw std::invalid_argument("select_design: method has no utility");
   }
   const DesignArgmax best = optimize_design(ch.surface.values());
   ch.index = best.index;
   ch.utility = best.value;
   ch.uninformative = best.uninformative;
   ch.design = candidates.row(best.index).transpose();
   return ch;
}

Matrix initial_design(const ProblemSpec &problem, std::uint64_t seed)
{
   return lhs_sample(problem.n_initial, problem.domain, mix_seed(seed, kTagInit));
}

Matrix resolve_candidates(const ProblemSpec &problem, const AccBoedConfig &cfg)
{
   if (cfg.candidate_grid.size() > 0)
   {
      if (cfg.candidate_grid.cols() != problem.domain.dim())
      {
         throw DimensionError("candidate grid dimension does not match the problem");
      }
      return cfg.candidate_grid;
   }
   return uniform_grid(problem.domain,
                       cfg.grid_per_axis > 0 ? cfg.grid_per_axis : problem.grid_per_axis);
}

PoiKind resolve_poi_kind(const PoiKind &kind, const GpModel &gp, const Box &domain)
{
   PoiKind out = kind;
   if (out.variant == PoiVariant::LimitState && !(out.lambda > 0.0))
   {
      out.lambda = default_lambda(gp, domain);
   }
   out.validate();
   return out;
}

const Matrix &true_posterior_samples(const ProblemSpec &problem)
{
   static std::mutex mutex;
   static std::map<std::string, Matrix> cache;
   if (!problem.true_log_posterior)
   {
      throw std::invalid_argument("problem " + problem.name + " has no posterior");
   }
   std::lock_guard<std::mutex> lock(mutex);
   auto it = cache.find(problem.name);
   if (it == cache.end())
   {
      const SampleSet s = mh_sample(problem.true_log_posterior, problem.domain,
                                    problem.posterior_mcmc, Exec::Parallel);
      it = cache.emplace(problem.name, s.points).first;
   }
   return it->second;
}

SampleSet surrogate_posterior(const ProblemSpec &problem, const GpModel &gp, std::uint64_t seed,
                              int n_samples)
{
   McmcConfig mc = problem.posterior_mcmc;
   mc.initial_points = Matrix();
   mc.proposal_scale = 0.1;
   mc.seed = seed;
   if (n_samples > 0) { mc.n_samples = n_samples; }
   const PoiKind kind = problem.poi_kind;
   const Box &domain = problem.domain;
   return mh_sample([&](const Vector &z) { return poi_logdensity(kind, gp, z, domain); }, domain,
                    mc, Exec::Parallel);
}

double evaluate_metric(const ProblemSpec &problem, const GpModel &gp, std::uint64_t seed,
                       const AccBoedConfig &cfg, Matrix *posterior)
{
   switch (problem.metric)
   {
   case MetricKind::Rmse:
      return rmse(gp, problem.truth, uniform_grid(problem.domain, 100));
   case MetricKind::FailureProbability:
      return estimate_failure_probability(gp, problem.failure_samples, problem.failure_seed,
                                          cfg.exec)
         .probability;
   case MetricKind::PosteriorKl:
   {
      const SampleSet s = surrogate_posterior(problem, gp, seed, cfg.posterior_samples);
      if (posterior) { *posterior = s.points; }
      return kl_estimate(s.points, true_posterior_samples(problem), 5, cfg.exec);
   }
   }
   return kNaN;
}

namespace
{

struct StopTracker
{
   StoppingRule rule;
   int streak = 0;
   std::optional<Vector> previous;

   // Feeds the current indicator; returns true once the rule has held for
   // `patience` consecutive iterations.
   bool update(const Vector &current, double diameter)
   {
      if (rule.kind == StopKind::None) { return false; }
      bool small = false;
      if (previous)
      {
         switch (rule.kind)
         {
         case StopKind::RelativeRmseChange:
         {
            const double denom = std::sqrt(current.squaredNorm() / double(current.size()));
            const double diff =
               std::sqrt((current - *previous).squaredNorm() / double(current.size()));
            small = denom > 0.0 && diff / denom < rule.eps_z;
            break;
         }
         case StopKind::PosteriorMeanShift:
            small = (current - *previous).norm() < rule.eps_z * diameter;
            break;
         case StopKind::FailureProbabilityChange:
            small = (*previous)(0) > 0.0 &&
                    std::abs(current(0) - (*previous)(0)) / (*previous)(0) < rule.eps_z;
            break;
         case StopKind::None: break;
         }
      }
      previous = current;
      streak = small ? streak + 1 : 0;
      return streak >= rule.patience;
   }
};

GpModel fit_for(const ProblemSpec &problem, const Dataset &data, const KernelSpec &init,
                double noise_init, std::uint64_t seed)
{
   FitOptions opts;
   opts.seed = seed;
   return fit_gp(data, init, noise_init, default_bounds(data, problem.domain.diameter()), opts)
      .model;
}

Vector forward_all(const ProblemSpec &problem, const Matrix &x, Rng &rng)
{
   Vector y(x.rows());
   for (int i = 0; i < x.rows(); ++i) { y(i) = problem.forward(x.row(i).transpose(), rng); }
   return y;
}

}  // namespace

FrozenState frozen_state(const ProblemSpec &problem, const AccBoedConfig &cfg, int n_train)
{
   cfg.validate();
   Rng sim_rng = make_stream(cfg.seed, kTagSim);
   const Matrix x0 = n_train > 0
                        ? lhs_sample(n_train, problem.domain,
                                     mix_seed(cfg.seed, kTagInit, static_cast<std::uint64_t>(n_train)))
                        : initial_design(problem, cfg.seed);
   const Dataset data(x0, forward_all(problem, x0, sim_rng));
   GpModel gp = fit_for(problem, data, problem.kernel_init, problem.noise_init,
                        mix_seed(cfg.seed, kTagFit, 0));
   const PoiKind poi = resolve_poi_kind(problem.poi_kind, gp, problem.domain);
   McmcConfig mc = cfg.mcmc;
   mc.n_samples = cfg.big_n_z;
   mc.seed = mix_seed(cfg.seed, kTagPoi, 1);
   const SampleSet pool = mh_sample(
      [&](const Vector &z) { return poi_logdensity(poi, gp, z, problem.domain); }, problem.domain,
      mc, cfg.exec);
   return FrozenState{std::move(gp), resolve_candidates(problem, cfg), pool.points};
}

RunResult acc_boed_run(const ProblemSpec &problem, const AccBoedConfig &cfg, Method method)
{
   RunResult res;
   res.problem = problem.name;
   res.method = method;
   try
   {
      if (method != Method::AccBoed && method != Method::BasicBoed)
      {
         throw std::invalid_argument("acc_boed_run: method must be acc_boed or basic_boed");
      }
      cfg.validate();
      const int n_iter = cfg.max_iterations >= 0 ? cfg.max_iterations : problem.iterations;
      const Matrix candidates = resolve_candidates(problem, cfg);
      const Box &domain = problem.domain;

      auto start = Clock::now();
      Rng sim_rng = make_stream(cfg.seed, kTagSim);
      const Matrix x0 = initial_design(problem, cfg.seed);
      Dataset data(x0, forward_all(problem, x0, sim_rng));
      GpModel gp = fit_for(problem, data, problem.kernel_init, problem.noise_init,
                           mix_seed(cfg.seed, kTagFit, 0));
      const KernelSpec pinned_kernel = gp.kernel();
      const double pinned_noise = gp.noise_variance();
      const double t0_total = seconds_since(start);

      Matrix posterior;
      RunRecord rec0;
      rec0.iteration = 0;
      rec0.utility_at_choice = kNaN;
      rec0.dataset_size = data.size();
      rec0.metric_name = metric_name(problem.metric);
      rec0.metric_value =
         evaluate_metric(problem, gp, mix_seed(cfg.seed, kTagMetric, 0), cfg, &posterior);
      rec0.wall_time_total = t0_total;
      res.records.push_back(rec0);
      res.initial_posterior = posterior;
      res.final_posterior = posterior;
      res.data = data;
      res.kernel = gp.kernel();
      res.noise_variance = gp.noise_variance();

      StopTracker stop{problem.stopping, 0, std::nullopt};
      for (int t = 1; t <= n_iter; ++t)
      {
         start = Clock::now();
         const PoiKind poi = resolve_poi_kind(problem.poi_kind, gp, domain);
         McmcConfig mc = cfg.mcmc;
         mc.n_samples = cfg.big_n_z;
         mc.seed = mix_seed(cfg.seed, kTagPoi, static_cast<std::uint64_t>(t));
         const SampleSet pool = mh_sample(
            [&](const Vector &z) { return poi_logdensity(poi, gp, z, domain); }, domain, mc,
            cfg.exec);

         const DesignChoice ch = select_design(gp, candidates, pool.points, cfg, method, t);
         const double y = problem.forward(ch.design, sim_rng);
         data = data.appended(ch.design, y);
         if (problem.pin_hyperparameters)
         {
            gp = GpModel(data, pinned_kernel, pinned_noise, true);
         }
         else
         {
            gp = fit_for(problem, data, gp.kernel(), gp.noise_variance(),
                         mix_seed(cfg.seed, kTagFit, static_cast<std::uint64_t>(t)));
         }

         RunRecord rec;
         rec.iteration = t;
         rec.chosen_design = ch.design;
         rec.utility_at_choice = ch.utility;
         rec.uninformative = ch.uninformative;
         rec.dataset_size = data.size();
         rec.metric_name = metric_name(problem.metric);
         rec.wall_time_utility = ch.t_sweep_s;
         rec.wall_time_total = seconds_since(start);
         rec.metric_value = evaluate_metric(
            problem, gp, mix_seed(cfg.seed, kTagMetric, static_cast<std::uint64_t>(t)), cfg,
            &posterior);
         res.records.push_back(rec);
         res.final_posterior = posterior;
         res.data = data;
         res.kernel = gp.kernel();
         res.noise_variance = gp.noise_variance();

         if (cfg.enable_stopping)
         {
            Vector indicator;
            switch (problem.stopping.kind)
            {
            case StopKind::RelativeRmseChange: indicator = gp.predict_mean(candidates); break;
            case StopKind::PosteriorMeanShift:
               indicator = pool.points.colwise().mean().transpose();
               break;
            case StopKind::FailureProbabilityChange:
               indicator = Vector::Constant(1, rec.metric_value);
               break;
            case StopKind::None: break;
            }
            if (stop.update(indicator, domain.diameter())) { break; }
         }
      }
   }
   catch (const std::exception &e)
   {
      res.ok = false;
      res.error = e.what();
   }
   return res;
}

RunResult baseline_run(const ProblemSpec &problem, Method scheme, const std::vector<int> &sizes,
                       const AccBoedConfig &cfg)
{
   RunResult res;
   res.problem = problem.name;
   res.method = scheme;
   try
   {
      if (scheme != Method::Random && scheme != Method::Lhs)
      {
         throw std::invalid_argument("baseline_run: scheme must be random or lhs");
      }
      if (sizes.empty()) { throw std::invalid_argument("baseline_run: no sizes"); }
      for (std::size_t k = 1; k < sizes.size(); ++k)
      {
         if (sizes[k] <= sizes[k - 1])
         {
            throw std::invalid_argument("baseline_run: sizes must increase");
         }
      }
      const Box &domain = problem.domain;

      // Same hyperparameter policy as the sequential loop: pinned problems
      // take the fit on the shared initial design.
      KernelSpec pinned_kernel = problem.kernel_init;
      double pinned_noise = problem.noise_init;
      if (problem.pin_hyperparameters)
      {
         Rng sim_rng = make_stream(cfg.seed, kTagSim);
         const Matrix x0 = initial_design(problem, cfg.seed);
         const Dataset d0(x0, forward_all(problem, x0, sim_rng));
         const GpModel g0 = fit_for(problem, d0, problem.kernel_init, problem.noise_init,
                                    mix_seed(cfg.seed, kTagFit, 0));
         pinned_kernel = g0.kernel();
         pinned_noise = g0.noise_variance();
      }

      Matrix nested;
      if (scheme == Method::Random)
      {
         Rng rng = make_stream(cfg.seed, kTagRandom);
         nested = uniform_sample(sizes.back(), domain, rng);
      }
      Matrix posterior;
      for (std::size_t k = 0; k < sizes.size(); ++k)
      {
         const auto start = Clock::now();
         const int n = sizes[k];
         const Matrix x = scheme == Method::Random
                             ? Matrix(nested.topRows(n))
                             : lhs_sample(n, domain, mix_seed(cfg.seed, kTagLhs,
                                                              static_cast<std::uint64_t>(n)));
         Rng sim_rng = make_stream(cfg.seed, kTagSim, static_cast<std::uint64_t>(n));
         const Dataset data(x, forward_all(problem, x, sim_rng));
         const GpModel gp =
            problem.pin_hyperparameters
               ? GpModel(data, pinned_kernel, pinned_noise, true)
               : fit_for(problem, data, problem.kernel_init, problem.noise_init,
                         mix_seed(cfg.seed, kTagFit, static_cast<std::uint64_t>(n)));
         RunRecord rec;
         rec.iteration = static_cast<int>(k);
         rec.utility_at_choice = kNaN;
         rec.dataset_size = n;
         rec.metric_name = metric_name(problem.metric);
         rec.wall_time_total = seconds_since(start);
         rec.metric_value = evaluate_metric(
            problem, gp, mix_seed(cfg.seed, kTagMetric, static_cast<std::uint64_t>(k)), cfg,
            &posterior);
         res.records.push_back(rec);
         if (k == 0) { res.initial_posterior = posterior; }
         res.final_posterior = posterior;
         res.data = data;
         res.kernel = gp.kernel();
         res.noise_variance = gp.noise_variance();
      }
   }
   catch (const std::exception &e)
   {
      res.ok = false;
      res.error = e.what();
   }
   return res;
}

RunResult run_method(const ProblemSpec &problem, const AccBoedConfig &cfg, Method method)
{
   if (method == Method::AccBoed || method == Method::BasicBoed)
   {
      return acc_boed_run(problem, cfg, method);
   }
   const int n_iter = cfg.max_iterations >= 0 ? cfg.max_iterations : problem.iterations;
   std::vector<int> sizes;
   for (int k = 0; k <= n_iter; ++k) { sizes.push_back(problem.n_initial + k); }
   return baseline_run(problem, method, sizes, cfg);
}

void write_records_csv(const std::vector<RunRecord> &records, int design_dim, std::ostream &out,
                       bool include_timing)
{
   const auto prec = out.precision(17);
   out << "iteration";
   for (int j = 0; j < design_dim; ++j) { out << ",design_" << j; }
   out << ",utility,dataset_size,metric_name,metric_value";
   if (include_timing) { out << ",t_utility_s,t_total_s"; }
   out << '\n';
   for (const auto &r : records)
   {
      out << r.iteration;
      for (int j = 0; j < design_dim; ++j)
      {
         out << ',';
         if (r.chosen_design.size() == design_dim) { out << r.chosen_design(j); }
      }
      out << ',';
      if (std::isfinite(r.utility_at_choice)) { out << r.utility_at_choice; }
      out << ',' << r.dataset_size << ',' << r.metric_name << ',' << r.metric_value;
      if (include_timing) { out << ',' << r.wall_time_utility << ',' << r.wall_time_total; }
      out << '\n';
   }
   out.precision(prec);
}

}  // namespace accboed
