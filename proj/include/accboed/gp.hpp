// Copyright 2026 The accboed Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef ACCBOED_GP_HPP
#define ACCBOED_GP_HPP

#include "accboed/common.hpp"

#include <array>
#include <optional>

namespace accboed
{

enum class KernelFamily
{
   SquaredExponential,
   Matern
};

struct KernelSpec
{
   KernelFamily family = KernelFamily::SquaredExponential;
   double signal_variance = 1.0;
   double lengthscale = 1.0;
   double smoothness = 2.5;  // Matern only: 0.5, 1.5 or 2.5

   void validate() const;
};

// Covariance as a function of the scaled distance s = r / lengthscale.
double kernel_of_scaled_distance(const KernelSpec &spec, double s);

double kernel_eval(const KernelSpec &spec, const Vector &x, const Vector &x2);

// Cross-covariance matrix K(a_i, b_j) between the rows of a and b.
Matrix kernel_matrix(const KernelSpec &spec, const Matrix &a, const Matrix &b);

struct Dataset
{
   Matrix inputs;   // n x dim
   Vector outputs;  // n

   Dataset() = default;
   Dataset(Matrix x, Vector y);

   int size() const { return static_cast<int>(outputs.size()); }
   int dim() const { return static_cast<int>(inputs.cols()); }
   Dataset appended(const Vector &x, double y) const;
};

struct GaussianPrediction
{
   Vector mean;
   Matrix covariance;
   bool jitter_applied = false;
};

// Immutable conditioned Gaussian process with zero prior mean on the
// (optionally centered) outputs.
class GpModel
{
public:
   // Factorizes K + noise*I. Throws NumericalError if jitter escalation up to
   // 1e-4 * signal_variance does not produce a positive-definite matrix.
   GpModel(Dataset data, KernelSpec kernel, double noise_variance,
           bool center_outputs = false);

   const KernelSpec &kernel() const { return kernel_; }
   double noise_variance() const { return noise_variance_; }
   const Dataset &data() const { return data_; }
   int dim() const { return data_.dim(); }
   double output_offset() const { return offset_; }
   double jitter() const { return jitter_; }
   bool centered() const { return centered_; }

   const Matrix &chol_factor() const { return chol_; }
   const Vector &alpha() const { return alpha_; }

   // L^{-1} K(X, q_j) for every query row; n x m.
   Matrix whitened_cross(const Matrix &queries) const;

   // Latent mean and variance only, for each query row.
   void predict_marginal(const Matrix &queries, Vector &mean,
                         Vector &variance) const;

   // Latent mean only; skips the triangular solve.
   Vector predict_mean(const Matrix &queries) const;

   double log_marginal_likelihood() const;

   // Gradient with respect to (log signal_variance, log lengthscale,
   // log noise_variance).
   std::array<double, 3> log_marginal_likelihood_gradient() const;

private:
   Dataset data_;
   KernelSpec kernel_;
   double noise_variance_;
   bool centered_;
   double offset_ = 0.0;
   double jitter_ = 0.0;
   Matrix chol_;
   Vector alpha_;
   Vector whitened_y_;

   friend GaussianPrediction predict_constrained(const GpModel &,
                                                 const Matrix &,
                                                 const Vector &, double);
};

double log_marginal_likelihood(const GpModel &model);

struct Interval
{
   double lo;
   double hi;
};

struct HyperBounds
{
   Interval signal_variance;
   Interval lengthscale;
   Interval noise_variance;
};

// Default box: lengthscale in [1e-2, 2] * domain diameter, signal variance in
// [1e-4, 1e4] * var(y), noise variance in [1e-8, var(y)].
HyperBounds default_bounds(const Dataset &data, double domain_diameter);

struct FitOptions
{
   int n_starts = 5;
   int max_iterations = 200;
   bool center_outputs = true;
   std::uint64_t seed = 0;
};

struct FitResult
{
   GpModel model;
   bool fallback = false;  // degenerate data: init returned unchanged
};

FitResult fit_gp(const Dataset &data, const KernelSpec &init,
                 double noise_init, const HyperBounds &bounds,
                 const FitOptions &options = {});

GaussianPrediction predict(const GpModel &model, const Matrix &queries);

// Prediction after appending the virtual observation (constraint_point,
// constraint_value) with the model's noise variance, hyperparameters fixed.
// Uses a one-row extension of the cached Cholesky factor.
GaussianPrediction predict_constrained(const GpModel &model,
                                       const Matrix &queries,
                                       const Vector &constraint_point,
                                       double constraint_value);

double posterior_cov(const GpModel &model, const Vector &a, const Vector &b);

// Posterior covariance between every row of a and every row of b.
Matrix posterior_cov_matrix(const GpModel &model, const Matrix &a,
                            const Matrix &b);

}  // namespace accboed

#endif  // ACCBOED_GP_HPP
