// Copyright 2026 The accboed Authors
// SPDX-License-Identifier: Apache-2.0

#include "accboed/kmn.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

using namespace accboed;

namespace
{

// y = f(d, z) + noise_sd * e on uniform (d, z) in [0, 1]^dim each.
std::vector<CdeRecord> make_records(int n, int dim, std::uint64_t seed, double noise_sd,
                                    bool independent)
{
   Rng rng(seed);
   std::uniform_real_distribution<double> u(0.0, 1.0);
   std::normal_distribution<double> g(0.0, 1.0);
   std::vector<CdeRecord> out(n);
   for (auto &r : out)
   {
      r.design = Vector(dim);
      r.poi_point = Vector(dim);
      for (int j = 0; j < dim; ++j)
      {
         r.design(j) = u(rng);
         r.poi_point(j) = u(rng);
      }
      const double f = independent ? 0.0 : 2.0 * r.design(0) + std::sin(3.0 * r.poi_point(0));
      r.y_sample = f + noise_sd * g(rng);
   }
   return out;
}

double quadrature_mass(const KmnModel &m, const Vector &d, const Vector &z)
{
   const KernelBank &b = m.bank();
   const double hmax = b.bandwidths.maxCoeff();
   const double lo = b.means.minCoeff() - 6.0 * hmax;
   const double hi = b.means.maxCoeff() + 6.0 * hmax;
   const int n = 20000;
   const double h = (hi - lo) / n;
   const Vector w = m.weights(d, z);
   double s = 0.0;
   for (int i = 0; i <= n; ++i)
   {
      s += ((i == 0 || i == n) ? 0.5 : 1.0) * m.mixture_density(w, lo + i * h);
   }
   return s * h;
}

}  // namespace

TEST_CASE("build_centers on a uniform grid")
{
   const KernelBank b = build_centers(Vector::LinSpaced(11, 0.0, 10.0), 11);
   REQUIRE(b.centers.size() == 11);
   for (int k = 0; k <= 10; ++k) { CHECK(b.centers(k) == doctest::Approx(double(k))); }
   CHECK(b.means.size() == 22);
   for (int k = 0; k < 11; ++k)
   {
      CHECK(b.bandwidths(2 * k) == doctest::Approx(0.5));
      CHECK(b.bandwidths(2 * k + 1) == doctest::Approx(1.5));
   }
   CHECK_FALSE(b.collapsed);
   CHECK_THROWS_AS(build_centers(Vector::LinSpaced(11, 0.0, 10.0), 1), std::invalid_argument);
}

TEST_CASE("build_centers sorted output, explicit bandwidths, collapse")
{
   Rng rng(4);
   std::normal_distribution<double> g(0.0, 3.0);
   Vector y(500);
   for (int i = 0; i < y.size(); ++i) { y(i) = g(rng); }
   const KernelBank b = build_centers(y, 15);
   for (int k = 1; k < 15; ++k) { CHECK(b.centers(k) >= b.centers(k - 1)); }
   CHECK((b.bandwidths.array() > 0.0).all());

   const KernelBank fixed = build_centers(y, 5, {0.2, 0.4, 0.8});
   CHECK(fixed.means.size() == 15);
   CHECK(fixed.bandwidths(4) == 0.4);

   const KernelBank flat = build_centers(Vector::Constant(30, 2.0), 4);
   CHECK(flat.collapsed);
   CHECK(flat.centers(3) - flat.centers(0) == doctest::Approx(2e-3 * 3.0));
}

TEST_CASE("one-hot weights give the Gaussian peak")
{
   const KernelBank bank = build_centers(Vector::LinSpaced(11, 0.0, 10.0), 11);
   const int k = static_cast<int>(bank.means.size());
   for (int i : {0, 7, 21})
   {
      KmnModel::Layer layer;
      layer.weight = Matrix::Zero(k, 2);
      layer.bias = Vector::Zero(k);
      layer.bias(i) = 1000.0;
      const KmnModel m({layer}, bank, 1, Vector::Zero(2), Vector::Ones(2));
      const Vector d = Vector::Constant(1, 0.3);
      const Vector z = Vector::Constant(1, 0.6);
      const double h = bank.bandwidths(i);
      CHECK(kmn_density(m, bank.means(i), d, z) ==
            doctest::Approx(1.0 / (std::sqrt(2.0 * std::numbers::pi) * h)).epsilon(1e-12));
   }
}

TEST_CASE("NLL gradient matches central differences on a toy problem")
{
   KmnConfig cfg;
   cfg.hidden_sizes = {4, 3};
   cfg.n_centers = 3;
   cfg.seed = 8;
   const auto recs = make_records(5, 1, 3, 0.3, false);
   KmnModel m = init_kmn(recs, cfg);
   std::vector<double> p = m.parameters();
   // Move off the initialization so every layer carries signal.
   Rng rng(1);
   std::normal_distribution<double> g(0.0, 0.3);
   for (double &v : p) { v += g(rng); }
   m.set_parameters(p);
   const std::vector<double> grad = m.nll_gradient(recs);
   REQUIRE(grad.size() == p.size());
   const double h = 1e-5;
   int bad = 0;
   for (std::size_t i = 0; i < p.size(); ++i)
   {
      std::vector<double> a = p;
      std::vector<double> b = p;
      a[i] += h;
      b[i] -= h;
      KmnModel ma = m;
      KmnModel mb = m;
      ma.set_parameters(a);
      mb.set_parameters(b);
      const double fd = (ma.nll(recs) - mb.nll(recs)) / (2.0 * h);
      const double rel = std::abs(grad[i] - fd) / std::max(std::abs(fd), 1e-4);
      if (rel > 1e-4) { ++bad; }
   }
   CHECK(bad == 0);
}

TEST_CASE("trained model: simplex weights and unit mass")
{
   KmnConfig cfg;
   cfg.seed = 3;
   cfg.epochs = 30;
   const auto recs = make_records(800, 2, 5, 0.2, false);
   KmnTrainingLog log;
   const KmnModel m = train_kmn(recs, cfg, &log);
   CHECK(log.final_nll <= log.initial_nll);
   Rng rng(17);
   std::uniform_real_distribution<double> u(-0.2, 1.2);
   for (int t = 0; t < 100; ++t)
   {
      const Vector d = Vector::NullaryExpr(2, [&](Eigen::Index) { return u(rng); });
      const Vector z = Vector::NullaryExpr(2, [&](Eigen::Index) { return u(rng); });
      const Vector w = m.weights(d, z);
      CHECK((w.array() >= 0.0).all());
      CHECK(std::abs(w.sum() - 1.0) < 1e-10);
      const double mass = quadrature_mass(m, d, z);
      CHECK(mass >= 0.999);
      CHECK(mass <= 1.001);
      CHECK(kmn_density(m, 0.5, d, z) > 0.0);
   }
}

TEST_CASE("independent standard-normal targets reach the analytic entropy")
{
   KmnConfig cfg;
   cfg.seed = 12;
   const auto train = make_records(3000, 1, 21, 1.0, true);
   const auto held = make_records(3000, 1, 22, 1.0, true);
   const KmnModel m = train_kmn(train, cfg);
   const double entropy = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);
   CHECK(std::abs(m.nll(held) - entropy) < 0.05);
}

TEST_CASE("deterministic map: mode lands on f within two bandwidths")
{
   KmnConfig cfg;
   cfg.seed = 2;
   cfg.epochs = 150;
   const auto train = make_records(3000, 1, 31, 0.01, false);
   const auto held = make_records(200, 1, 32, 0.0, false);
   const KmnModel m = train_kmn(train, cfg);
   const KernelBank &b = m.bank();
   const double lo = b.means.minCoeff();
   const double hi = b.means.maxCoeff();
   int hits = 0;
   for (const auto &r : held)
   {
      const Vector w = m.weights(r.design, r.poi_point);
      double best = -1.0;
      double mode = lo;
      for (int i = 0; i <= 4000; ++i)
      {
         const double y = lo + (hi - lo) * i / 4000.0;
         const double v = m.mixture_density(w, y);
         if (v > best)
         {
            best = v;
            mode = y;
         }
      }
      // Narrow bandwidth of the nearest center.
      int k = 0;
      for (int i = 1; i < b.means.size(); ++i)
      {
         if (std::abs(b.means(i) - r.y_sample) < std::abs(b.means(k) - r.y_sample)) { k = i; }
      }
      const double h = std::min(b.bandwidths(k), b.bandwidths(k % 2 == 0 ? k + 1 : k - 1));
      if (std::abs(mode - r.y_sample) <= 2.0 * h) { ++hits; }
   }
   // Misses sit in the top quantile tail, where the bank is sparsest.
   CHECK(hits >= 180);
}

TEST_CASE("training determinism, zero epochs, full-batch permutation invariance")
{
   KmnConfig cfg;
   cfg.seed = 5;
   cfg.epochs = 10;
   auto recs = make_records(400, 1, 41, 0.3, false);
   const KmnModel a = train_kmn(recs, cfg);
   const KmnModel b = train_kmn(recs, cfg);
   CHECK(a.parameters() == b.parameters());

   KmnConfig zero = cfg;
   zero.epochs = 0;
   KmnTrainingLog log;
   const KmnModel z = train_kmn(recs, zero, &log);
   CHECK(z.parameters() == init_kmn(recs, zero).parameters());
   CHECK(log.final_nll == log.initial_nll);

   KmnConfig full = cfg;
   full.batch_size = static_cast<int>(recs.size());
   KmnTrainingLog l1, l2;
   train_kmn(recs, full, &l1);
   std::reverse(recs.begin(), recs.end());
   std::swap(recs[3], recs[100]);
   train_kmn(recs, full, &l2);
   CHECK(std::abs(l1.final_nll - l2.final_nll) < 1e-6);
}

TEST_CASE("insufficient data, config validation, serialization")
{
   KmnConfig cfg;
   const auto few = make_records(10 * cfg.n_centers - 1, 1, 1, 0.1, false);
   CHECK_THROWS_AS(train_kmn(few, cfg), InsufficientData);

   KmnConfig bad = cfg;
   bad.n_centers = 1;
   CHECK_THROWS(bad.validate());
   bad = cfg;
   bad.bandwidths = {0.1, -1.0};
   CHECK_THROWS(bad.validate());

   cfg.epochs = 3;
   const auto recs = make_records(300, 2, 9, 0.1, false);
   const KmnModel m = train_kmn(recs, cfg);
   std::stringstream ss;
   m.save(ss);
   const KmnModel r = KmnModel::load(ss);
   CHECK(r.parameters() == m.parameters());
   CHECK(r.nll(recs) == m.nll(recs));
}
