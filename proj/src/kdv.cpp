// Copyright 2026 The accboed Authors
// SPDX-License-Identifier: Apache-2.0

#include "accboed/kdv.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>

namespace accboed
{

namespace
{

using cplx = std::complex<double>;

// Owns the FFTW buffers and plans for one transform size. FFTW planning is not
// thread-safe, so plans are created under a critical section.
class SpectralWorkspace
{
public:
   explicit SpectralWorkspace(int n) : n_(n), nc_(n / 2 + 1)
   {
      real_ = fftw_alloc_real(n_);
      spec_ = fftw_alloc_complex(nc_);
#pragma omp critical(accboed_fftw_plan)
      {
         forward_ = fftw_plan_dft_r2c_1d(n_, real_, spec_, FFTW_ESTIMATE);
         backward_ = fftw_plan_dft_c2r_1d(n_, spec_, real_, FFTW_ESTIMATE);
      }
   }
   ~SpectralWorkspace()
   {
#pragma omp critical(accboed_fftw_plan)
      {
         fftw_destroy_plan(forward_);
         fftw_destroy_plan(backward_);
      }
      fftw_free(real_);
      fftw_free(spec_);
   }
   SpectralWorkspace(const SpectralWorkspace &) = delete;
   SpectralWorkspace &operator=(const SpectralWorkspace &) = delete;

   void to_spectral(const Vector &u, std::vector<cplx> &out)
   {
      for (int i = 0; i < n_; ++i) { real_[i] = u(i); }
      fftw_execute(forward_);
      out.resize(nc_);
      for (int k = 0; k < nc_; ++k) { out[k] = cplx(spec_[k][0], spec_[k][1]); }
   }

   void to_physical(const std::vector<cplx> &in, Vector &u)
   {
      for (int k = 0; k < nc_; ++k)
      {
         spec_[k][0] = in[k].real();
         spec_[k][1] = in[k].imag();
      }
      fftw_execute(backward_);
      u.resize(n_);
      for (int i = 0; i < n_; ++i) { u(i) = real_[i] / n_; }
   }

private:
   int n_;
   int nc_;
   double *real_;
   fftw_complex *spec_;
   fftw_plan forward_;
   fftw_plan backward_;
};

struct Etdrk4
{
   std::vector<cplx> e, e2, q, f1, f2, f3;
   std::vector<cplx> nonlinear_factor;  // -theta1 i k / 2, dealiased
};

Etdrk4 etdrk4_coefficients(const KdvTheta &theta, int n, double length, double h)
{
   const int nc = n / 2 + 1;
   const int cutoff = n / 3;
   Etdrk4 c;
   c.e.resize(nc);
   c.e2.resize(nc);
   c.q.resize(nc);
   c.f1.resize(nc);
   c.f2.resize(nc);
   c.f3.resize(nc);
   c.nonlinear_factor.resize(nc);
   constexpr int kContour = 32;
   for (int j = 0; j < nc; ++j)
   {
      const bool keep = j <= cutoff && !(n % 2 == 0 && j == n / 2);
      const double k = keep ? 2.0 * std::numbers::pi * j / length : 0.0;
      const cplx lin(0.0, theta[1] * k * k * k);
      c.e[j] = std::exp(h * lin);
      c.e2[j] = std::exp(0.5 * h * lin);
      cplx q(0.0), f1(0.0), f2(0.0), f3(0.0);
      for (int m = 1; m <= kContour; ++m)
      {
         const cplx r = std::exp(cplx(0.0, 2.0 * std::numbers::pi * (m - 0.5) / kContour));
         const cplx lr = h * lin + r;
         const cplx elr = std::exp(lr);
         q += (std::exp(0.5 * lr) - 1.0) / lr;
         f1 += (-4.0 - lr + elr * (4.0 - 3.0 * lr + lr * lr)) / (lr * lr * lr);
         f2 += (2.0 + lr + elr * (-2.0 + lr)) / (lr * lr * lr);
         f3 += (-4.0 - 3.0 * lr - lr * lr + elr * (4.0 - lr)) / (lr * lr * lr);
      }
      // L is imaginary here, so the contour must be the full circle.
      c.q[j] = h * q / double(kContour);
      c.f1[j] = h * f1 / double(kContour);
      c.f2[j] = h * f2 / double(kContour);
      c.f3[j] = h * f3 / double(kContour);
      c.nonlinear_factor[j] = keep ? cplx(0.0, -0.5 * theta[0] * k) : cplx(0.0);
   }
   return c;
}

class KdvIntegrator
{
public:
   KdvIntegrator(const KdvTheta &theta, int n, double length, double h)
      : n_(n), ws_(n), coef_(etdrk4_coefficients(theta, n, length, h))
   {
   }

   void nonlinear(const std::vector<cplx> &v, std::vector<cplx> &out)
   {
      ws_.to_physical(v, phys_);
      phys_ = phys_.array().square();
      ws_.to_spectral(phys_, out);
      for (std::size_t j = 0; j < out.size(); ++j) { out[j] *= coef_.nonlinear_factor[j]; }
   }

   void step(std::vector<cplx> &v)
   {
      const std::size_t nc = v.size();
      nonlinear(v, nv_);
      a_.resize(nc);
      for (std::size_t j = 0; j < nc; ++j) { a_[j] = coef_.e2[j] * v[j] + coef_.q[j] * nv_[j]; }
      nonlinear(a_, na_);
      b_.resize(nc);
      for (std::size_t j = 0; j < nc; ++j) { b_[j] = coef_.e2[j] * v[j] + coef_.q[j] * na_[j]; }
      nonlinear(b_, nb_);
      c_.resize(nc);
      for (std::size_t j = 0; j < nc; ++j)
      {
         c_[j] = coef_.e2[j] * a_[j] + coef_.q[j] * (2.0 * nb_[j] - nv_[j]);
      }
      nonlinear(c_, nc_);
      for (std::size_t j = 0; j < nc; ++j)
      {
         v[j] = coef_.e[j] * v[j] + nv_[j] * coef_.f1[j] +
                2.0 * (na_[j] + nb_[j]) * coef_.f2[j] + nc_[j] * coef_.f3[j];
      }
   }

   SpectralWorkspace &workspace() { return ws_; }

private:
   int n_;
   SpectralWorkspace ws_;
   Etdrk4 coef_;
   Vector phys_;
   std::vector<cplx> nv_, a_, na_, b_, nb_, c_, nc_;
};

}  // namespace

int kdv_auto_substeps(const KdvTheta &theta, const Vector &u0, double length, double dt)
{
   const int n = static_cast<int>(u0.size());
   const double kmax = 2.0 * std::numbers::pi * (n / 3) / length;
   const double speed = std::abs(theta[0]) * 1.5 * u0.cwiseAbs().maxCoeff();
   // An advective Courant number of 0.125 per internal step keeps the ETDRK4
   // time error of the default problem near 1e-5.
   return std::max(1, static_cast<int>(std::ceil(speed * kmax * dt / 0.125)));
}

SolverDiverged::SolverDiverged(const KdvTheta &theta)
   : std::runtime_error("KdV solver diverged at theta = (" + std::to_string(theta[0]) +
                        ", " + std::to_string(theta[1]) + ")"),
     theta_(theta)
{
}

KdvSetup default_kdv_setup()
{
   KdvSetup s;
   s.initial_condition = [](double x)
   {
      const double sech = 1.0 / std::cosh((x - 15.0) / 2.0);
      return 2.0 * std::cos(std::numbers::pi * x / 15.0) + 3.0 * sech * sech;
   };
   return s;
}

KdvField::KdvField(Matrix values, double dx, double dt)
   : values_(std::move(values)), dx_(dx), dt_(dt)
{
}

double KdvField::at(double x, double t) const
{
   const int nx = static_cast<int>(values_.cols());
   const int nt = static_cast<int>(values_.rows());
   const double length = nx * dx_;
   double xr = std::fmod(x, length);
   if (xr < 0.0) { xr += length; }
   const double fx = xr / dx_;
   const int i0 = std::min(static_cast<int>(std::floor(fx)), nx - 1);
   const int i1 = (i0 + 1) % nx;
   const double wx = fx - i0;
   const double ft = std::clamp(t / dt_, 0.0, double(nt - 1));
   const int j0 = std::min(static_cast<int>(std::floor(ft)), nt - 2);
   const int j1 = j0 + 1;
   const double wt = ft - j0;
   const double a = (1.0 - wx) * values_(j0, i0) + wx * values_(j0, i1);
   const double b = (1.0 - wx) * values_(j1, i0) + wx * values_(j1, i1);
   return (1.0 - wt) * a + wt * b;
}

KdvField kdv_solve_from(const KdvTheta &theta, const Vector &u0, double x_length,
                        double t_final, int n_time, int substeps)
{
   const int n = static_cast<int>(u0.size());
   const double dt = t_final / n_time;
   const int sub = substeps > 0 ? substeps : kdv_auto_substeps(theta, u0, x_length, dt);
   KdvIntegrator integ(theta, n, x_length, dt / sub);

   Matrix out(n_time + 1, n);
   out.row(0) = u0.transpose();
   std::vector<cplx> v;
   integ.workspace().to_spectral(u0, v);
   const double bound = 1e3 * std::max(1.0, u0.cwiseAbs().maxCoeff());
   Vector u(n);
   for (int step = 1; step <= n_time; ++step)
   {
      for (int s = 0; s < sub; ++s) { integ.step(v); }
      integ.workspace().to_physical(v, u);
      if (!u.allFinite() || u.cwiseAbs().maxCoeff() > bound) { throw SolverDiverged(theta); }
      out.row(step) = u.transpose();
   }
   return KdvField(std::move(out), x_length / n, dt);
}

KdvField kdv_solve(const KdvTheta &theta, const KdvSetup &setup)
{
   Vector u0(setup.n_space);
   for (int i = 0; i < setup.n_space; ++i) { u0(i) = setup.initial_condition(i * setup.dx()); }
   return kdv_solve_from(theta, u0, setup.x_length, setup.t_final, setup.n_time);
}

void generate_observations(KdvSetup &setup)
{
   const KdvField field = kdv_solve(setup.theta_true, setup);
   Rng rng = make_stream(setup.seed, 0x6b6476);
   std::uniform_real_distribution<double> ux(0.0, setup.x_length);
   std::uniform_real_distribution<double> ut(0.0, setup.t_final);
   std::normal_distribution<double> noise(0.0, setup.obs_noise_std);
   setup.observations.clear();
   for (int i = 0; i < setup.obs_count; ++i)
   {
      const double x = ux(rng);
      const double t = ut(rng);
      setup.observations.push_back({x, t, field.at(x, t) + noise(rng)});
   }
}

double kdv_observable(const KdvTheta &theta, const KdvSetup &setup)
{
   if (setup.observations.empty())
   {
      throw std::invalid_argument("kdv_observable: setup has no observations");
   }
   try
   {
      const KdvField field = kdv_solve(theta, setup);
      double sse = 0.0;
      for (const auto &o : setup.observations)
      {
         const double r = field.at(o.x, o.t) - o.value;
         sse += r * r;
      }
      return sse / double(setup.observations.size());
   }
   catch (const SolverDiverged &)
   {
      return std::numeric_limits<double>::infinity();
   }
}

void write_observations_csv(const KdvSetup &setup, std::ostream &out)
{
   const auto p = out.precision(17);
   out << "x,t,value\n";
   for (const auto &o : setup.observations) { out << o.x << ',' << o.t << ',' << o.value << '\n'; }
   out.precision(p);
}

void write_observations_json(const KdvSetup &setup, std::ostream &out)
{
   const auto p = out.precision(17);
   out << "{\n  \"seed\": " << setup.seed << ",\n  \"theta_true\": [" << setup.theta_true[0]
       << ", " << setup.theta_true[1] << "],\n  \"obs_count\": " << setup.obs_count
       << ",\n  \"obs_noise_std\": " << setup.obs_noise_std << ",\n  \"n_space\": "
       << setup.n_space << ",\n  \"n_time\": " << setup.n_time << "\n}\n";
   out.precision(p);
}

}  // namespace accboed
