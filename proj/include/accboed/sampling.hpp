// Copyright 2026 The accboed Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef ACCBOED_SAMPLING_HPP
#define ACCBOED_SAMPLING_HPP

#include "accboed/common.hpp"

namespace accboed
{

// Latin hypercube design: each axis is cut into n equal strata and every
// stratum holds exactly one point, jittered uniformly inside it.
Matrix lhs_sample(int n, const Box &domain, Rng &rng);
Matrix lhs_sample(int n, const Box &domain, std::uint64_t seed);

// n iid uniform points in the box.
Matrix uniform_sample(int n, const Box &domain, Rng &rng);

}  // namespace accboed

#endif  // ACCBOED_SAMPLING_HPP
