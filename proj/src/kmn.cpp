// Copyright 2026 The accboed Authors
// SPDX-License-Identifier: Apache-2.0

#include "accboed/kmn.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>

namespace accboed
{

namespace
{

constexpr double kHalfLog2Pi = 0.91893853320467274;
constexpr const char *kFormatTag = "accboed-kmn";
constexpr int kFormatVersion = 1;

using Layers = std::vector<KmnModel::Layer>;

// Column-wise log-sum-exp.
Eigen::RowVectorXd column_lse(const Matrix &m)
{
   const Eigen::RowVectorXd mx = m.colwise().maxCoeff();
   return mx.array() + (m.rowwise() - mx).array().exp().colwise().sum().log();
}

// log N(y_b | mu_i, h_i^2) for every component i and sample b.
Matrix log_kernels(const KernelBank &bank, const Eigen::RowVectorXd &y)
{
   const int m = static_cast<int>(bank.means.size());
   Matrix out(m, y.size());
   for (int b = 0; b < y.size(); ++b)
   {
      for (int i = 0; i < m; ++i)
      {
         const double h = bank.bandwidths(i);
         const double d = (y(b) - bank.means(i)) / h;
         out(i, b) = -kHalfLog2Pi - std::log(h) - 0.5 * d * d;
      }
   }
   return out;
}

struct Grads
{
   std::vector<Matrix> dw;
   std::vector<Vector> db;

   explicit Grads(const Layers &layers)
   {
      for (const auto &l : layers)
      {
         dw.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
         db.push_back(Vector::Zero(l.bias.size()));
      }
   }
};

// Mean NLL of a batch; fills gradients of the mean NLL when grads != nullptr.
double forward_backward(const Layers &layers, const KernelBank &bank,
                        const Matrix &xs, const Eigen::RowVectorXd &y, Grads *grads)
{
   const int n_layers = static_cast<int>(layers.size());
   std::vector<Matrix> acts;
   acts.reserve(n_layers);
   acts.push_back(xs);
   for (int l = 0; l + 1 < n_layers; ++l)
   {
      Matrix z = layers[l].weight * acts.back();
      z.colwise() += layers[l].bias;
      acts.push_back(z.array().tanh().matrix());
   }
   Matrix logits = layers.back().weight * acts.back();
   logits.colwise() += layers.back().bias;

   const Eigen::RowVectorXd lse = column_lse(logits);
   const Matrix log_w = logits.rowwise() - lse;
   const Matrix joint = log_w + log_kernels(bank, y);
   const Eigen::RowVectorXd log_p = column_lse(joint);
   const double batch = static_cast<double>(y.size());
   const double nll = -log_p.sum() / batch;
   if (!grads) { return nll; }

   // d(-log p)/d logits = softmax - responsibilities.
   Matrix delta = (log_w.array().exp() - (joint.rowwise() - log_p).array().exp()).matrix() / batch;
   for (int l = n_layers - 1; l >= 0; --l)
   {
      grads->dw[l].noalias() = delta * acts[l].transpose();
      grads->db[l] = delta.rowwise().sum();
      if (l > 0)
      {
         Matrix back = layers[l].weight.transpose() * delta;
         delta = back.array() * (1.0 - acts[l].array().square());
      }
   }
   return nll;
}

Matrix standardize(const Matrix &inputs, const Vector &mean, const Vector &scale)
{
   return ((inputs.colwise() - mean).array().colwise() / scale.array()).matrix();
}

Matrix record_inputs(const std::vector<CdeRecord> &records)
{
   const int dd = static_cast<int>(records.front().design.size());
   const int dz = static_cast<int>(records.front().poi_point.size());
   Matrix x(dd + dz, records.size());
   for (std::size_t j = 0; j < records.size(); ++j)
   {
      x.col(j).head(dd) = records[j].design;
      x.col(j).tail(dz) = records[j].poi_point;
   }
   return x;
}

Eigen::RowVectorXd record_targets(const std::vector<CdeRecord> &records)
{
   Eigen::RowVectorXd y(records.size());
   for (std::size_t j = 0; j < records.size(); ++j) { y(j) = records[j].y_sample; }
   return y;
}

}  // namespace

void KmnConfig::validate() const
{
   if (n_centers < 2) { throw std::invalid_argument("KmnConfig: n_centers must be >= 2"); }
   for (double h : bandwidths)
   {
      if (!(h > 0.0)) { throw std::invalid_argument("KmnConfig: bandwidths must be > 0"); }
   }
   for (int h : hidden_sizes)
   {
      if (h < 1) { throw std::invalid_argument("KmnConfig: hidden sizes must be >= 1"); }
   }
   if (!(learning_rate > 0.0) || epochs < 0 || batch_size < 1)
   {
      throw std::invalid_argument("KmnConfig: invalid optimizer settings");
   }
}

KernelBank build_centers(const Vector &y_values, int n_centers,
                         const std::vector<double> &bandwidths)
{
   if (n_centers < 2) { throw std::invalid_argument("build_centers: n_centers must be >= 2"); }
   if (y_values.size() == 0) { throw std::invalid_argument("build_centers: no values"); }
   std::vector<double> sorted(y_values.data(), y_values.data() + y_values.size());
   std::sort(sorted.begin(), sorted.end());

   KernelBank bank;
   bank.centers.resize(n_centers);
   const double n = static_cast<double>(sorted.size());
   for (int k = 0; k < n_centers; ++k)
   {
      const double pos = double(k) / (n_centers - 1) * (n - 1.0);
      const auto lo = static_cast<std::size_t>(std::floor(pos));
      const auto hi = std::min(lo + 1, sorted.size() - 1);
      const double frac = pos - double(lo);
      bank.centers(k) = sorted[lo] + frac * (sorted[hi] - sorted[lo]);
   }
   double spread = bank.centers(n_centers - 1) - bank.centers(0);
   if (!(spread > 0.0))
   {
      const double c = bank.centers(0);
      const double half = 1e-3 * (1.0 + std::abs(c));
      bank.centers = Vector::LinSpaced(n_centers, c - half, c + half);
      bank.collapsed = true;
      spread = 2.0 * half;
   }
   // Each center's spacing is the mean gap to its neighbours; repeated
   // quantiles fall back to the mean spacing.
   const double mean_spacing = spread / (n_centers - 1);
   Vector local(n_centers);
   for (int k = 0; k < n_centers; ++k)
   {
      const int lo = std::max(k - 1, 0);
      const int hi = std::min(k + 1, n_centers - 1);
      const double gap = (bank.centers(hi) - bank.centers(lo)) / double(hi - lo);
      local(k) = gap > 0.0 ? gap : mean_spacing;
   }
   const int per = bandwidths.empty() ? 2 : static_cast<int>(bandwidths.size());
   bank.means.resize(n_centers * per);
   bank.bandwidths.resize(n_centers * per);
   for (int k = 0; k < n_centers; ++k)
   {
      for (int b = 0; b < per; ++b)
      {
         bank.means(k * per + b) = bank.centers(k);
         bank.bandwidths(k * per + b) =
            bandwidths.empty() ? (b == 0 ? 0.5 : 1.5) * local(k) : bandwidths[b];
      }
   }
   return bank;
}

KmnModel::KmnModel(std::vector<Layer> layers, KernelBank bank, int design_dim,
                   Vector input_mean, Vector input_scale)
   : layers_(std::move(layers)), bank_(std::move(bank)), design_dim_(design_dim),
     input_mean_(std::move(input_mean)), input_scale_(std::move(input_scale))
{
   if (layers_.empty()) { throw std::invalid_argument("KmnModel: no layers"); }
   if (layers_.front().weight.cols() != input_mean_.size() ||
       layers_.back().weight.rows() != bank_.means.size())
   {
      throw DimensionError("KmnModel: layer shapes do not match inputs/components");
   }
}

Matrix KmnModel::forward_logits(const Matrix &standardized) const
{
   Matrix a = standardized;
   for (std::size_t l = 0; l < layers_.size(); ++l)
   {
      Matrix z = layers_[l].weight * a;
      z.colwise() += layers_[l].bias;
      a = l + 1 < layers_.size() ? Matrix(z.array().tanh().matrix()) : z;
   }
   return a;
}

Matrix KmnModel::weights(const Matrix &inputs) const
{
   if (inputs.rows() != input_dim()) { throw DimensionError("KmnModel: input dimension mismatch"); }
   const Matrix logits = forward_logits(standardize(inputs, input_mean_, input_scale_));
   Matrix w = (logits.rowwise() - logits.colwise().maxCoeff()).array().exp().matrix();
   return w.array().rowwise() / w.colwise().sum().array();
}

Vector KmnModel::weights(const Vector &design, const Vector &poi_point) const
{
   if (design.size() != design_dim_ || design.size() + poi_point.size() != input_dim())
   {
      throw DimensionError("KmnModel: input dimension mismatch");
   }
   Vector x(input_dim());
   x << design, poi_point;
   return weights(Matrix(x)).col(0);
}

Matrix KmnModel::weights_for_design(const Vector &design, const Matrix &poi_rows) const
{
   const int dd = design_dim_;
   const int dz = input_dim() - dd;
   if (design.size() != dd || poi_rows.cols() != dz)
   {
      throw DimensionError("KmnModel: input dimension mismatch");
   }
   const Layer &first = layers_.front();
   const Vector ds = (design - input_mean_.head(dd)).cwiseQuotient(input_scale_.head(dd));
   const Matrix zs = ((poi_rows.transpose().colwise() - input_mean_.tail(dz)).array().colwise() /
                      input_scale_.tail(dz).array()).matrix();
   const Vector shared = first.weight.leftCols(dd) * ds + first.bias;
   Matrix a = first.weight.rightCols(dz) * zs;
   a.colwise() += shared;
   for (std::size_t l = 1; l < layers_.size(); ++l)
   {
      a = a.array().tanh().matrix();
      Matrix z = layers_[l].weight * a;
      z.colwise() += layers_[l].bias;
      a = std::move(z);
   }
   Matrix w = (a.rowwise() - a.colwise().maxCoeff()).array().exp().matrix();
   return w.array().rowwise() / w.colwise().sum().array();
}

double KmnModel::mixture_density(const Eigen::Ref<const Vector> &w, double y) const
{
   double p = 0.0;
   for (int i = 0; i < n_components(); ++i)
   {
      const double h = bank_.bandwidths(i);
      const double d = (y - bank_.means(i)) / h;
      p += w(i) * std::exp(-0.5 * d * d) / h;
   }
   return p * 0.3989422804014327;
}

double KmnModel::density(double y, const Vector &design, const Vector &poi_point) const
{
   return mixture_density(weights(design, poi_point), y);
}

double kmn_density(const KmnModel &model, double y, const Vector &design,
                   const Vector &poi_point)
{
   return model.density(y, design, poi_point);
}

double KmnModel::nll(const std::vector<CdeRecord> &records) const
{
   if (records.empty()) { return 0.0; }
   return forward_backward(layers_, bank_,
                           standardize(record_inputs(records), input_mean_, input_scale_),
                           record_targets(records), nullptr);
}

std::vector<double> KmnModel::parameters() const
{
   std::vector<double> p;
   for (const auto &l : layers_)
   {
      p.insert(p.end(), l.weight.data(), l.weight.data() + l.weight.size());
      p.insert(p.end(), l.bias.data(), l.bias.data() + l.bias.size());
   }
   return p;
}

void KmnModel::set_parameters(const std::vector<double> &params)
{
   std::size_t k = 0;
   for (auto &l : layers_)
   {
      const auto nw = static_cast<std::size_t>(l.weight.size());
      const auto nb = static_cast<std::size_t>(l.bias.size());
      if (k + nw + nb > params.size()) { throw DimensionError("KmnModel: parameter count"); }
      std::copy_n(params.begin() + k, nw, l.weight.data());
      k += nw;
      std::copy_n(params.begin() + k, nb, l.bias.data());
      k += nb;
   }
   if (k != params.size()) { throw DimensionError("KmnModel: parameter count"); }
}

std::vector<double> KmnModel::nll_gradient(const std::vector<CdeRecord> &records) const
{
   Grads g(layers_);
   forward_backward(layers_, bank_,
                    standardize(record_inputs(records), input_mean_, input_scale_),
                    record_targets(records), &g);
   std::vector<double> out;
   for (std::size_t l = 0; l < layers_.size(); ++l)
   {
      out.insert(out.end(), g.dw[l].data(), g.dw[l].data() + g.dw[l].size());
      out.insert(out.end(), g.db[l].data(), g.db[l].data() + g.db[l].size());
   }
   return out;
}

void KmnModel::save(std::ostream &out) const
{
   const auto old_precision = out.precision(17);
   auto write_vec = [&](const double *p, Eigen::Index n)
   {
      for (Eigen::Index i = 0; i < n; ++i) { out << (i ? " " : "") << p[i]; }
      out << '\n';
   };
   out << kFormatTag << ' ' << kFormatVersion << '\n';
   out << design_dim_ << ' ' << input_dim() << ' ' << layers_.size() << ' '
       << n_components() << ' ' << bank_.centers.size() << ' ' << int(bank_.collapsed) << '\n';
   for (const auto &l : layers_)
   {
      out << l.weight.rows() << ' ' << l.weight.cols() << '\n';
      write_vec(l.weight.data(), l.weight.size());
      write_vec(l.bias.data(), l.bias.size());
   }
   write_vec(bank_.means.data(), bank_.means.size());
   write_vec(bank_.bandwidths.data(), bank_.bandwidths.size());
   write_vec(bank_.centers.data(), bank_.centers.size());
   write_vec(input_mean_.data(), input_mean_.size());
   write_vec(input_scale_.data(), input_scale_.size());
   out.precision(old_precision);
}

KmnModel KmnModel::load(std::istream &in)
{
   std::string tag;
   int version = 0;
   in >> tag >> version;
   if (tag != kFormatTag || version != kFormatVersion)
   {
      throw std::runtime_error("KmnModel::load: unsupported format");
   }
   int design_dim = 0, input_dim = 0, n_components = 0, n_centers = 0, collapsed = 0;
   std::size_t n_layers = 0;
   in >> design_dim >> input_dim >> n_layers >> n_components >> n_centers >> collapsed;
   auto read_vec = [&](Eigen::Index n)
   {
      Vector v(n);
      for (Eigen::Index i = 0; i < n; ++i) { in >> v(i); }
      return v;
   };
   std::vector<Layer> layers(n_layers);
   for (auto &l : layers)
   {
      Eigen::Index rows = 0, cols = 0;
      in >> rows >> cols;
      l.weight.resize(rows, cols);
      for (Eigen::Index i = 0; i < rows * cols; ++i) { in >> l.weight.data()[i]; }
      l.bias = read_vec(rows);
   }
   KernelBank bank;
   bank.means = read_vec(n_components);
   bank.bandwidths = read_vec(n_components);
   bank.centers = read_vec(n_centers);
   bank.collapsed = collapsed != 0;
   Vector mean = read_vec(input_dim);
   Vector scale = read_vec(input_dim);
   if (!in) { throw std::runtime_error("KmnModel::load: truncated input"); }
   return KmnModel(std::move(layers), std::move(bank), design_dim, std::move(mean),
                   std::move(scale));
}

KmnModel init_kmn(const std::vector<CdeRecord> &records, const KmnConfig &config)
{
   config.validate();
   if (records.empty()) { throw InsufficientData("init_kmn: no records"); }
   const Matrix x = record_inputs(records);
   const Eigen::RowVectorXd y = record_targets(records);
   const Vector mean = x.rowwise().mean();
   Vector scale = ((x.colwise() - mean).array().square().rowwise().sum() /
                   double(std::max<Eigen::Index>(x.cols() - 1, 1))).sqrt();
   for (int i = 0; i < scale.size(); ++i)
   {
      if (!(scale(i) > 1e-12)) { scale(i) = 1.0; }
   }
   KernelBank bank = build_centers(y.transpose(), config.n_centers, config.bandwidths);

   Rng rng = make_stream(config.seed, 0x6b6d6e);
   std::vector<int> sizes;
   sizes.push_back(static_cast<int>(x.rows()));
   sizes.insert(sizes.end(), config.hidden_sizes.begin(), config.hidden_sizes.end());
   sizes.push_back(static_cast<int>(bank.means.size()));
   std::vector<KmnModel::Layer> layers;
   for (std::size_t l = 0; l + 1 < sizes.size(); ++l)
   {
      const int fan_in = sizes[l];
      const int fan_out = sizes[l + 1];
      const double a = std::sqrt(6.0 / (fan_in + fan_out));
      std::uniform_real_distribution<double> u(-a, a);
      KmnModel::Layer layer;
      layer.weight.resize(fan_out, fan_in);
      for (Eigen::Index i = 0; i < layer.weight.size(); ++i) { layer.weight.data()[i] = u(rng); }
      layer.bias = Vector::Zero(fan_out);
      layers.push_back(std::move(layer));
   }
   return KmnModel(std::move(layers), std::move(bank),
                   static_cast<int>(records.front().design.size()), mean, scale);
}

KmnModel train_kmn(const std::vector<CdeRecord> &records, const KmnConfig &config,
                   KmnTrainingLog *log)
{
   config.validate();
   if (records.size() < static_cast<std::size_t>(10 * config.n_centers))
   {
      throw InsufficientData("train_kmn: need at least 10 * n_centers records, got " +
                             std::to_string(records.size()));
   }
   const KmnModel initial = init_kmn(records, config);
   const Matrix xs = standardize(record_inputs(records), initial.input_mean(),
                                 initial.input_scale());
   const Eigen::RowVectorXd y = record_targets(records);
   const int n = static_cast<int>(records.size());
   const int batch = std::min(config.batch_size, n);

   const double initial_nll = forward_backward(initial.layers(), initial.bank(), xs, y, nullptr);
   double lr = config.learning_rate;
   for (int attempt = 0; attempt <= 3; ++attempt)
   {
      Layers layers = initial.layers();
      Grads velocity(layers);
      Grads grads(layers);
      Rng rng = make_stream(config.seed, 0x7368, attempt);
      std::vector<int> order(n);
      std::iota(order.begin(), order.end(), 0);
      Layers best = layers;
      double best_nll = initial_nll;
      bool finite = true;

      for (int epoch = 0; epoch < config.epochs && finite; ++epoch)
      {
         if (batch < n) { std::shuffle(order.begin(), order.end(), rng); }
         for (int start = 0; start < n; start += batch)
         {
            const int m = std::min(batch, n - start);
            Matrix xb(xs.rows(), m);
            Eigen::RowVectorXd yb(m);
            for (int j = 0; j < m; ++j)
            {
               xb.col(j) = xs.col(order[start + j]);
               yb(j) = y(order[start + j]);
            }
            const double loss = forward_backward(layers, initial.bank(), xb, yb, &grads);
            if (!std::isfinite(loss))
            {
               finite = false;
               break;
            }
            for (std::size_t l = 0; l < layers.size(); ++l)
            {
               velocity.dw[l] = config.momentum * velocity.dw[l] - lr * grads.dw[l];
               velocity.db[l] = config.momentum * velocity.db[l] - lr * grads.db[l];
               layers[l].weight += velocity.dw[l];
               layers[l].bias += velocity.db[l];
            }
         }
         if (!finite) { break; }
         const double epoch_nll = forward_backward(layers, initial.bank(), xs, y, nullptr);
         if (!std::isfinite(epoch_nll))
         {
            finite = false;
            break;
         }
         if (epoch_nll < best_nll)
         {
            best_nll = epoch_nll;
            best = layers;
         }
      }
      if (finite)
      {
         if (log)
         {
            log->initial_nll = initial_nll;
            log->final_nll = best_nll;
            log->restarts = attempt;
         }
         return KmnModel(std::move(best), initial.bank(), initial.design_dim(),
                         initial.input_mean(), initial.input_scale());
      }
      lr *= 0.5;
   }
   throw std::runtime_error("train_kmn: non-finite loss after 3 learning-rate halvings");
}

}  // namespace accboed
