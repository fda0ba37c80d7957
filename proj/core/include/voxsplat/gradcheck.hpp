/*
 * Copyright (C) 2026 The voxsplat authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "voxsplat/tensor.hpp"

namespace voxsplat::ad {

/// Compares the reverse-mode gradient of `f` against central finite
/// differences over every entry of every parameter. `f` must be deterministic
/// and rebuild its graph from the current parameter values on each call.
/// Returns the max of |analytic - numeric| / max(|analytic|, |numeric|, 1e-6);
/// the 1e-6 floor turns the comparison absolute for entries below the
/// central-difference noise floor.
double finite_diff_check(const std::function<Tensor()>& f, std::vector<Tensor> params,
                         double h = 1e-5);

}  // namespace voxsplat::ad

namespace voxsplat {

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0;
  bool pass = false;
};

/// Finite-difference audit of every primitive op plus the differentiable
/// render and the full three-loss training graph. Inputs are sampled away
/// from the non-smooth points of each op (clamp edges, relu/abs kinks,
/// interpolation cell boundaries).
std::vector<GradCheckEntry> gradcheck_suite(uint64_t seed, double threshold = 1e-4);

}  // namespace voxsplat
