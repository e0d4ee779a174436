// Copyright 2026 The accboed Authors
// SPDX-License-Identifier: Apache-2.0

#include "accboed/sampling.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace accboed
{

Matrix lhs_sample(int n, const Box &domain, Rng &rng)
{
   if (n < 1) { throw std::invalid_argument("lhs_sample: n must be >= 1"); }
   const int dim = domain.dim();
   Matrix out(n, dim);
   std::uniform_real_distribution<double> unit(0.0, 1.0);
   std::vector<int> perm(n);
   for (int j = 0; j < dim; ++j)
   {
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      const double width = domain.upper(j) - domain.lower(j);
      for (int i = 0; i < n; ++i)
      {
         const double t = (perm[i] + unit(rng)) / n;
         out(i, j) = domain.lower(j) + std::min(t, 1.0) * width;
      }
   }
   return out;
}

Matrix lhs_sample(int n, const Box &domain, std::uint64_t seed)
{
   Rng rng = make_stream(seed, 0x6c6873);
   return lhs_sample(n, domain, rng);
}

Matrix uniform_sample(int n, const Box &domain, Rng &rng)
{
   std::uniform_real_distribution<double> unit(0.0, 1.0);
   Matrix out(n, domain.dim());
   for (int i = 0; i < n; ++i)
   {
      for (int j = 0; j < domain.dim(); ++j)
      {
         out(i, j) = domain.lower(j) + unit(rng) * (domain.upper(j) - domain.lower(j));
      }
   }
   return out;
}

}  // namespace accboed
