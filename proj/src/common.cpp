// Copyright 2026 The accboed Authors
// SPDX-License-Identifier: Apache-2.0

#include "accboed/common.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

namespace accboed
{

Box::Box(Vector lo, Vector hi) : lower(std::move(lo)), upper(std::move(hi))
{
   if (lower.size() != upper.size() || lower.size() == 0)
   {
      throw DimensionError("Box: bounds must be non-empty and of equal size");
   }
   for (int i = 0; i < lower.size(); ++i)
   {
      if (!(upper(i) > lower(i)))
      {
         throw std::invalid_argument("Box: degenerate interval");
      }
   }
}

bool Box::contains(const Vector &x) const
{
   if (x.size() != lower.size()) { return false; }
   for (int i = 0; i < x.size(); ++i)
   {
      if (!(x(i) >= lower(i) && x(i) <= upper(i))) { return false; }
   }
   return true;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b)
{
   auto mix = [](std::uint64_t z)
   {
      z += 0x9e3779b97f4a7c15ULL;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      return z ^ (z >> 31);
   };
   return mix(mix(mix(seed) ^ a) ^ (b * 0xd1b54a32d192ed03ULL));
}

Matrix uniform_grid(const Box &box, int per_axis)
{
   const int dim = box.dim();
   if (per_axis < 1) { throw std::invalid_argument("uniform_grid: per_axis < 1"); }
   long total = 1;
   for (int i = 0; i < dim; ++i) { total *= per_axis; }
   Matrix grid(total, dim);
   for (long row = 0; row < total; ++row)
   {
      long rem = row;
      for (int j = dim - 1; j >= 0; --j)
      {
         const long idx = rem % per_axis;
         rem /= per_axis;
         const double t = per_axis == 1 ? 0.5 : double(idx) / (per_axis - 1);
         grid(row, j) = box.lower(j) + t * (box.upper(j) - box.lower(j));
      }
   }
   return grid;
}

int worker_threads()
{
   if (const char *env = std::getenv("ACCBOED_THREADS"))
   {
      const int n = std::atoi(env);
      if (n > 0) { return n; }
   }
   return omp_get_max_threads();
}

void configure_threads() { omp_set_num_threads(worker_threads()); }

}  // namespace accboed
