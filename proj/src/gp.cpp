// Copyright 2026 The accboed Authors
// SPDX-License-Identifier: Apache-2.0

#include "accboed/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace accboed
{

namespace
{

constexpr double kSqrt3 = 1.7320508075688772;
constexpr double kSqrt5 = 2.23606797749979;

bool is_half_integer_smoothness(double nu)
{
   return nu == 0.5 || nu == 1.5 || nu == 2.5;
}

// d k / d log(lengthscale) as a function of s = r / l.
double kernel_dlog_lengthscale(const KernelSpec &spec, double s)
{
   const double sv = spec.signal_variance;
   if (spec.family == KernelFamily::SquaredExponential)
   {
      return sv * s * s * std::exp(-0.5 * s * s);
   }
   if (spec.smoothness == 0.5) { return sv * s * std::exp(-s); }
   if (spec.smoothness == 1.5)
   {
      return 3.0 * sv * s * s * std::exp(-kSqrt3 * s);
   }
   return (5.0 / 3.0) * sv * s * s * (1.0 + kSqrt5 * s) * std::exp(-kSqrt5 * s);
}

double squared_distance(const Matrix &a, int i, const Matrix &b, int j)
{
   return (a.row(i) - b.row(j)).squaredNorm();
}

}  // namespace

void KernelSpec::validate() const
{
   if (!(signal_variance > 0.0) || !(lengthscale > 0.0))
   {
      throw std::invalid_argument(
         "KernelSpec: signal variance and lengthscale must be positive");
   }
   if (family == KernelFamily::Matern && !is_half_integer_smoothness(smoothness))
   {
      throw std::invalid_argument(
         "KernelSpec: Matern smoothness must be 0.5, 1.5 or 2.5");
   }
}

double kernel_of_scaled_distance(const KernelSpec &spec, double s)
{
   const double sv = spec.signal_variance;
   if (spec.family == KernelFamily::SquaredExponential)
   {
      return sv * std::exp(-0.5 * s * s);
   }
   if (spec.smoothness == 0.5) { return sv * std::exp(-s); }
   if (spec.smoothness == 1.5)
   {
      return sv * (1.0 + kSqrt3 * s) * std::exp(-kSqrt3 * s);
   }
   return sv * (1.0 + kSqrt5 * s + 5.0 * s * s / 3.0) * std::exp(-kSqrt5 * s);
}

double kernel_eval(const KernelSpec &spec, const Vector &x, const Vector &x2)
{
   if (x.size() != x2.size())
   {
      throw DimensionError("kernel_eval: dimension mismatch");
   }
   return kernel_of_scaled_distance(spec, (x - x2).norm() / spec.lengthscale);
}

Matrix kernel_matrix(const KernelSpec &spec, const Matrix &a, const Matrix &b)
{
   if (a.cols() != b.cols())
   {
      throw DimensionError("kernel_matrix: dimension mismatch");
   }
   Matrix k(a.rows(), b.rows());
   const double inv_l = 1.0 / spec.lengthscale;
   if (spec.family == KernelFamily::SquaredExponential)
   {
      const double c = -0.5 * inv_l * inv_l;
      for (int j = 0; j < b.rows(); ++j)
      {
         for (int i = 0; i < a.rows(); ++i)
         {
            k(i, j) = spec.signal_variance * std::exp(c * squared_distance(a, i, b, j));
         }
      }
      return k;
   }
   for (int j = 0; j < b.rows(); ++j)
   {
      for (int i = 0; i < a.rows(); ++i)
      {
         k(i, j) = kernel_of_scaled_distance(
            spec, std::sqrt(squared_distance(a, i, b, j)) * inv_l);
      }
   }
   return k;
}

Dataset::Dataset(Matrix x, Vector y) : inputs(std::move(x)), outputs(std::move(y))
{
   if (inputs.rows() != outputs.size())
   {
      throw DimensionError("Dataset: row count of inputs differs from outputs");
   }
   if (outputs.size() < 1) { throw std::invalid_argument("Dataset: empty"); }
}

Dataset Dataset::appended(const Vector &x, double y) const
{
   if (x.size() != inputs.cols())
   {
      throw DimensionError("Dataset::appended: dimension mismatch");
   }
   Matrix xs(inputs.rows() + 1, inputs.cols());
   xs.topRows(inputs.rows()) = inputs;
   xs.row(inputs.rows()) = x.transpose();
   Vector ys(outputs.size() + 1);
   ys.head(outputs.size()) = outputs;
   ys(outputs.size()) = y;
   return Dataset(std::move(xs), std::move(ys));
}

GpModel::GpModel(Dataset data, KernelSpec kernel, double noise_variance,
                 bool center_outputs)
   : data_(std::move(data)), kernel_(kernel), noise_variance_(noise_variance),
     centered_(center_outputs)
{
   kernel_.validate();
   if (!(noise_variance_ >= 0.0))
   {
      throw std::invalid_argument("GpModel: negative noise variance");
   }
   if (centered_) { offset_ = data_.outputs.mean(); }

   Matrix k = kernel_matrix(kernel_, data_.inputs, data_.inputs);
   k.diagonal().array() += noise_variance_;

   double jitter = 0.0;
   const double max_jitter = 1e-4 * kernel_.signal_variance;
   Eigen::LLT<Matrix> llt;
   while (true)
   {
      Matrix kj = k;
      kj.diagonal().array() += jitter;
      llt.compute(kj);
      if (llt.info() == Eigen::Success &&
          (llt.matrixLLT().diagonal().array() > 0.0).all())
      {
         break;
      }
      jitter = jitter == 0.0 ? 1e-10 * kernel_.signal_variance : jitter * 10.0;
      if (jitter > max_jitter * (1.0 + 1e-12))
      {
         throw NumericalError("GpModel: K + noise*I is not positive definite",
                              jitter / 10.0);
      }
   }
   jitter_ = jitter;
   chol_ = llt.matrixL();
   const Vector yc = data_.outputs.array() - offset_;
   whitened_y_ = chol_.triangularView<Eigen::Lower>().solve(yc);
   alpha_ = chol_.transpose().triangularView<Eigen::Upper>().solve(whitened_y_);
}

Matrix GpModel::whitened_cross(const Matrix &queries) const
{
   if (queries.cols() != data_.dim())
   {
      throw DimensionError("GpModel: query dimension mismatch");
   }
   Matrix ks = kernel_matrix(kernel_, data_.inputs, queries);
   chol_.triangularView<Eigen::Lower>().solveInPlace(ks);
   return ks;
}

void GpModel::predict_marginal(const Matrix &queries, Vector &mean,
                               Vector &variance) const
{
   if (queries.cols() != data_.dim())
   {
      throw DimensionError("GpModel: query dimension mismatch");
   }
   const Matrix ks = kernel_matrix(kernel_, data_.inputs, queries);
   mean = (ks.transpose() * alpha_).array() + offset_;
   Matrix v = ks;
   chol_.triangularView<Eigen::Lower>().solveInPlace(v);
   variance = (kernel_.signal_variance - v.colwise().squaredNorm().array()).matrix();
   variance = variance.cwiseMax(0.0);
}

Vector GpModel::predict_mean(const Matrix &queries) const
{
   if (queries.cols() != data_.dim())
   {
      throw DimensionError("GpModel: query dimension mismatch");
   }
   const Matrix ks = kernel_matrix(kernel_, data_.inputs, queries);
   return (ks.transpose() * alpha_).array() + offset_;
}

double GpModel::log_marginal_likelihood() const
{
   const int n = data_.size();
   const double data_fit = -0.5 * whitened_y_.squaredNorm();
   const double log_det = 2.0 * chol_.diagonal().array().log().sum();
   return data_fit - 0.5 * log_det - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

std::array<double, 3> GpModel::log_marginal_likelihood_gradient() const
{
   const int n = data_.size();
   Matrix kinv = Matrix::Identity(n, n);
   chol_.triangularView<Eigen::Lower>().solveInPlace(kinv);
   chol_.transpose().triangularView<Eigen::Upper>().solveInPlace(kinv);
   const Matrix w = alpha_ * alpha_.transpose() - kinv;

   double g_sv = 0.0;
   double g_l = 0.0;
   const double inv_l = 1.0 / kernel_.lengthscale;
   for (int j = 0; j < n; ++j)
   {
      for (int i = 0; i < n; ++i)
      {
         const double s = std::sqrt(squared_distance(data_.inputs, i, data_.inputs, j)) * inv_l;
         g_sv += w(i, j) * kernel_of_scaled_distance(kernel_, s);
         g_l += w(i, j) * kernel_dlog_lengthscale(kernel_, s);
      }
   }
   const double g_noise = w.trace() * noise_variance_;
   return {0.5 * g_sv, 0.5 * g_l, 0.5 * g_noise};
}

double log_marginal_likelihood(const GpModel &model)
{
   return model.log_marginal_likelihood();
}

HyperBounds default_bounds(const Dataset &data, double domain_diameter)
{
   const Vector &y = data.outputs;
   double var = 0.0;
   if (y.size() > 1)
   {
      var = (y.array() - y.mean()).square().sum() / double(y.size() - 1);
   }
   if (!(var > 0.0)) { var = 1.0; }
   return HyperBounds{{1e-4 * var, 1e4 * var},
                      {1e-2 * domain_diameter, 2.0 * domain_diameter},
                      {1e-8, var}};
}

namespace
{

struct LogParams
{
   std::array<double, 3> v;  // log sv, log l, log noise
};

std::optional<GpModel> try_model(const Dataset &data, const KernelSpec &base,
                                 const LogParams &p, bool center)
{
   KernelSpec k = base;
   k.signal_variance = std::exp(p.v[0]);
   k.lengthscale = std::exp(p.v[1]);
   try
   {
      return GpModel(data, k, std::exp(p.v[2]), center);
   }
   catch (const NumericalError &)
   {
      return std::nullopt;
   }
}

}  // namespace

FitResult fit_gp(const Dataset &data, const KernelSpec &init, double noise_init,
                 const HyperBounds &bounds, const FitOptions &options)
{
   init.validate();
   const int n = data.size();
   if (n < 2)
   {
      return FitResult{GpModel(data, init, noise_init, options.center_outputs), false};
   }
   const double ymean = data.outputs.mean();
   const double yvar = (data.outputs.array() - ymean).square().sum() / double(n - 1);
   // Constant outputs carry no information about the hyperparameters.
   if (!(yvar > 0.0))
   {
      return FitResult{GpModel(data, init, noise_init, options.center_outputs), true};
   }

   const std::array<Interval, 3> box{
      Interval{std::log(bounds.signal_variance.lo), std::log(bounds.signal_variance.hi)},
      Interval{std::log(bounds.lengthscale.lo), std::log(bounds.lengthscale.hi)},
      Interval{std::log(std::max(bounds.noise_variance.lo, 1e-300)),
               std::log(std::max(bounds.noise_variance.hi, 1e-300))}};
   auto project = [&](LogParams p)
   {
      for (int i = 0; i < 3; ++i) { p.v[i] = std::clamp(p.v[i], box[i].lo, box[i].hi); }
      return p;
   };

   const LogParams init_params{{std::log(init.signal_variance),
                                std::log(init.lengthscale),
                                std::log(std::max(noise_init, 1e-300))}};

   std::optional<GpModel> best;
   double best_lml = -std::numeric_limits<double>::infinity();
   if (auto m = try_model(data, init, init_params, options.center_outputs))
   {
      best_lml = m->log_marginal_likelihood();
      best = std::move(m);
   }

   Rng rng = make_stream(options.seed, 0x6770);
   std::uniform_real_distribution<double> unit(0.0, 1.0);
   for (int start = 0; start < options.n_starts; ++start)
   {
      LogParams p = init_params;
      if (start > 0)
      {
         for (int i = 0; i < 3; ++i)
         {
            p.v[i] = box[i].lo + unit(rng) * (box[i].hi - box[i].lo);
         }
      }
      p = project(p);
      auto model = try_model(data, init, p, options.center_outputs);
      if (!model) { continue; }
      double lml = model->log_marginal_likelihood();
      double step = 0.5;
      for (int it = 0; it < options.max_iterations && step > 1e-7; ++it)
      {
         const auto g = model->log_marginal_likelihood_gradient();
         const double gnorm = std::sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2]);
         if (!(gnorm > 1e-10)) { break; }
         LogParams trial = p;
         for (int i = 0; i < 3; ++i) { trial.v[i] += step * g[i] / gnorm; }
         trial = project(trial);
         auto cand = try_model(data, init, trial, options.center_outputs);
         const double cand_lml = cand ? cand->log_marginal_likelihood()
                                      : -std::numeric_limits<double>::infinity();
         if (cand_lml > lml)
         {
            p = trial;
            lml = cand_lml;
            model = std::move(cand);
            step *= 1.5;
         }
         else
         {
            step *= 0.5;
         }
      }
      if (lml > best_lml)
      {
         best_lml = lml;
         best = std::move(model);
      }
   }
   if (!best)
   {
      throw NumericalError("fit_gp: no start produced a valid factorization",
                           1e-4 * init.signal_variance);
   }
   return FitResult{std::move(*best), false};
}

GaussianPrediction predict(const GpModel &model, const Matrix &queries)
{
   const Matrix v = model.whitened_cross(queries);
   const Matrix ks = kernel_matrix(model.kernel(), model.data().inputs, queries);
   GaussianPrediction out;
   out.mean = (ks.transpose() * model.alpha()).array() + model.output_offset();
   out.covariance = kernel_matrix(model.kernel(), queries, queries);
   out.covariance.noalias() -= v.transpose() * v;
   for (int i = 0; i < out.covariance.rows(); ++i)
   {
      out.covariance(i, i) = std::max(out.covariance(i, i), 0.0);
   }
   return out;
}

GaussianPrediction predict_constrained(const GpModel &model, const Matrix &queries,
                                       const Vector &constraint_point,
                                       double constraint_value)
{
   if (constraint_point.size() != model.dim())
   {
      throw DimensionError("predict_constrained: constraint dimension mismatch");
   }
   const KernelSpec &kernel = model.kernel();
   const Matrix zrow = constraint_point.transpose();

   // New row of the extended Cholesky factor.
   const Vector l12 = model.whitened_cross(zrow).col(0);
   double schur = kernel.signal_variance + model.noise_variance() + model.jitter() -
                  l12.squaredNorm();
   bool jittered = false;
   const double floor = 1e-10 * kernel.signal_variance;
   double jitter = 0.0;
   while (!(schur > floor))
   {
      jitter = jitter == 0.0 ? 1e-10 * kernel.signal_variance : jitter * 10.0;
      if (jitter > 1e-4 * kernel.signal_variance * (1.0 + 1e-12))
      {
         throw NumericalError("predict_constrained: singular extension", jitter / 10.0);
      }
      schur += jitter;
      jittered = true;
   }
   const double l22 = std::sqrt(schur);
   const double w_last =
      (constraint_value - model.output_offset() - l12.dot(model.whitened_y_)) / l22;

   const Matrix ks = kernel_matrix(kernel, model.data().inputs, queries);
   Matrix v = ks;
   model.chol_.triangularView<Eigen::Lower>().solveInPlace(v);
   GaussianPrediction out;
   out.mean = (ks.transpose() * model.alpha()).array() + model.output_offset();
   out.covariance = kernel_matrix(kernel, queries, queries);
   out.covariance.noalias() -= v.transpose() * v;
   const Vector kzq = kernel_matrix(kernel, zrow, queries).row(0).transpose();
   const Vector v_last = (kzq - v.transpose() * l12) / l22;
   out.mean += v_last * w_last;
   out.covariance.noalias() -= v_last * v_last.transpose();
   for (int i = 0; i < out.covariance.rows(); ++i)
   {
      out.covariance(i, i) = std::max(out.covariance(i, i), 0.0);
   }
   out.jitter_applied = jittered;
   return out;
}

double posterior_cov(const GpModel &model, const Vector &a, const Vector &b)
{
   Matrix q(2, a.size());
   q.row(0) = a.transpose();
   q.row(1) = b.transpose();
   return predict(model, q).covariance(0, 1);
}

Matrix posterior_cov_matrix(const GpModel &model, const Matrix &a, const Matrix &b)
{
   Matrix c = kernel_matrix(model.kernel(), a, b);
   c.noalias() -= model.whitened_cross(a).transpose() * model.whitened_cross(b);
   return c;
}

}  // namespace accboed
