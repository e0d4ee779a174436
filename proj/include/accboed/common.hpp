// Copyright 2026 The accboed Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef ACCBOED_COMMON_HPP
#define ACCBOED_COMMON_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace accboed
{

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

// Axis-aligned box domain. Points are column vectors; point sets are stored
// one point per row.
struct Box
{
   Vector lower;
   Vector upper;

   Box() = default;
   Box(Vector lo, Vector hi);

   int dim() const { return static_cast<int>(lower.size()); }
   double diameter() const { return (upper - lower).norm(); }
   bool contains(const Vector &x) const;
};

// Execution policy for kernels that ship a serial reference and an OpenMP
// version. Both must produce bit-identical results.
enum class Exec
{
   Serial,
   Parallel
};

class DimensionError : public std::invalid_argument
{
public:
   using std::invalid_argument::invalid_argument;
};

class NumericalError : public std::runtime_error
{
public:
   NumericalError(const std::string &what, double jitter)
      : std::runtime_error(what), jitter_(jitter) {}
   double jitter() const { return jitter_; }

private:
   double jitter_;
};

class InsufficientData : public std::runtime_error
{
public:
   using std::runtime_error::runtime_error;
};

// splitmix64 finalizer; used to derive independent, schedule-independent
// RNG streams from (seed, a, b) tuples.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a = 0,
                       std::uint64_t b = 0);

inline Rng make_stream(std::uint64_t seed, std::uint64_t a = 0,
                       std::uint64_t b = 0)
{
   return Rng(mix_seed(seed, a, b));
}

// Uniform tensor grid with `per_axis` points per dimension over `box`,
// first coordinate varying slowest.
Matrix uniform_grid(const Box &box, int per_axis);

// Number of worker threads: ACCBOED_THREADS if set, else the OpenMP default.
int worker_threads();
void configure_threads();

}  // namespace accboed

#endif  // ACCBOED_COMMON_HPP
