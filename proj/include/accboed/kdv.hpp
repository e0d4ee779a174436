// Copyright 2026 The accboed Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef ACCBOED_KDV_HPP
#define ACCBOED_KDV_HPP

#include "accboed/common.hpp"

#include <array>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <vector>

namespace accboed
{

// u_t + theta1 u u_x + theta2 u_xxx = 0 on a periodic interval, Fourier
// pseudospectral in space with 2/3 dealiasing, ETDRK4 in time.

using KdvTheta = std::array<double, 2>;

struct KdvObservation
{
   double x;
   double t;
   double value;
};

struct KdvSetup
{
   int n_space = 100;
   int n_time = 500;
   double x_length = 30.0;
   double t_final = 5.0;
   int obs_count = 200;
   double obs_noise_std = 0.005;
   KdvTheta theta_true{6.0, 1.0};
   std::uint64_t seed = 7;
   std::vector<KdvObservation> observations;

   // Default initial condition; periodic on [0, x_length).
   std::function<double(double)> initial_condition;

   double dx() const { return x_length / n_space; }
   double dt() const { return t_final / n_time; }
};

// Setup with the default initial condition and no observations.
KdvSetup default_kdv_setup();

class SolverDiverged : public std::runtime_error
{
public:
   explicit SolverDiverged(const KdvTheta &theta);
   const KdvTheta &theta() const { return theta_; }

private:
   KdvTheta theta_;
};

// Solution on the full space-time grid: values(i_t, i_x) for i_t in
// [0, n_time], i_x in [0, n_space).
class KdvField
{
public:
   KdvField(Matrix values, double dx, double dt);

   const Matrix &values() const { return values_; }
   double dx() const { return dx_; }
   double dt() const { return dt_; }

   // Bilinear interpolation, periodic in x.
   double at(double x, double t) const;
   Vector snapshot(int time_index) const { return values_.row(time_index).transpose(); }

private:
   Matrix values_;
   double dx_;
   double dt_;
};

// Internal steps subdivide each output step so that the explicit advection
// stays well inside the ETDRK4 accuracy region.
KdvField kdv_solve(const KdvTheta &theta, const KdvSetup &setup);

// Same integrator from an explicit initial state. substeps = 0 picks the
// count from the initial amplitude; a positive value forces it.
KdvField kdv_solve_from(const KdvTheta &theta, const Vector &u0, double x_length,
                        double t_final, int n_time, int substeps = 0);

// Internal steps per output step chosen by the automatic rule.
int kdv_auto_substeps(const KdvTheta &theta, const Vector &u0, double x_length, double dt);

// Draws obs_count (x, t) locations and noisy values at theta_true.
void generate_observations(KdvSetup &setup);

// Mean squared error between the solution at theta and the stored
// observations; +inf when the solver diverges.
double kdv_observable(const KdvTheta &theta, const KdvSetup &setup);

void write_observations_csv(const KdvSetup &setup, std::ostream &out);
void write_observations_json(const KdvSetup &setup, std::ostream &out);

}  // namespace accboed

#endif  // ACCBOED_KDV_HPP
