// Copyright 2026 The accboed Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef ACCBOED_KMN_HPP
#define ACCBOED_KMN_HPP

#include "accboed/common.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace accboed
{

// Kernel mixture network: a tanh MLP maps (design, poi_point) to softmax
// weights over a fixed bank of Gaussian kernels in y.

struct KmnConfig
{
   std::vector<int> hidden_sizes{32, 32};
   int n_centers = 20;
   // Absolute kernel bandwidths given to every center. Empty selects
   // {0.5, 1.5} x the local center spacing (mean gap to the neighbours).
   std::vector<double> bandwidths;
   double learning_rate = 0.05;
   double momentum = 0.9;
   int epochs = 60;
   int batch_size = 64;
   std::uint64_t seed = 0;

   void validate() const;
};

struct CdeRecord
{
   Vector design;
   Vector poi_point;
   double y_sample = 0.0;
};

struct KernelBank
{
   Vector means;       // one entry per mixture component, sorted by center
   Vector bandwidths;  // same length as means
   Vector centers;     // the n_centers distinct quantile centers
   bool collapsed = false;
};

// Empirical quantile centers (equally spaced probabilities) with the
// per-center bandwidth set. Rejects n_centers < 2.
KernelBank build_centers(const Vector &y_values, int n_centers,
                         const std::vector<double> &bandwidths = {});

class KmnModel
{
public:
   struct Layer
   {
      Matrix weight;  // out x in
      Vector bias;
   };

   KmnModel() = default;
   KmnModel(std::vector<Layer> layers, KernelBank bank, int design_dim,
            Vector input_mean, Vector input_scale);

   int design_dim() const { return design_dim_; }
   int input_dim() const { return static_cast<int>(input_mean_.size()); }
   int n_components() const { return static_cast<int>(bank_.means.size()); }
   const KernelBank &bank() const { return bank_; }
   const std::vector<Layer> &layers() const { return layers_; }
   const Vector &input_mean() const { return input_mean_; }
   const Vector &input_scale() const { return input_scale_; }

   // Mixture weights for raw (unstandardized) inputs, one column per input.
   Matrix weights(const Matrix &inputs) const;
   Vector weights(const Vector &design, const Vector &poi_point) const;

   // Weights for a fixed design against many PoI points (rows of poi_rows);
   // the design half of the first layer is evaluated once.
   Matrix weights_for_design(const Vector &design, const Matrix &poi_rows) const;

   // Mixture density of y given the weight column.
   double mixture_density(const Eigen::Ref<const Vector> &w, double y) const;
   double density(double y, const Vector &design, const Vector &poi_point) const;

   // Mean negative log-likelihood over records.
   double nll(const std::vector<CdeRecord> &records) const;

   // Flattened parameters (layer by layer: weight column-major, then bias).
   std::vector<double> parameters() const;
   void set_parameters(const std::vector<double> &params);

   // Gradient of the mean NLL over records with respect to parameters().
   std::vector<double> nll_gradient(const std::vector<CdeRecord> &records) const;

   void save(std::ostream &out) const;
   static KmnModel load(std::istream &in);

private:
   Matrix forward_logits(const Matrix &standardized) const;

   std::vector<Layer> layers_;
   KernelBank bank_;
   int design_dim_ = 0;
   Vector input_mean_;
   Vector input_scale_;
};

double kmn_density(const KmnModel &model, double y, const Vector &design,
                   const Vector &poi_point);

struct KmnTrainingLog
{
   double initial_nll = 0.0;
   double final_nll = 0.0;
   int restarts = 0;
};

// Untrained network with the bank and input statistics derived from records.
KmnModel init_kmn(const std::vector<CdeRecord> &records, const KmnConfig &config);

// Requires at least 10 * n_centers records (else InsufficientData). Keeps the
// parameters with the lowest epoch-end training NLL.
KmnModel train_kmn(const std::vector<CdeRecord> &records, const KmnConfig &config,
                   KmnTrainingLog *log = nullptr);

}  // namespace accboed

#endif  // ACCBOED_KMN_HPP
