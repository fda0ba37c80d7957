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

#include <vector>

#include "voxsplat/tensor.hpp"

namespace voxsplat::ad {

// Elementwise, same shape.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor minimum(const Tensor& a, const Tensor& b);

// Broadcast variants: v is [C] against rows of a [N,C]; s is [N] or [N,1]
// against columns of a.
Tensor add_rowvec(const Tensor& a, const Tensor& v);
Tensor mul_rowvec(const Tensor& a, const Tensor& v);
Tensor mul_col(const Tensor& a, const Tensor& s);

Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);

Tensor matmul(const Tensor& a, const Tensor& b);

// Elementwise unaries.
Tensor exp(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor abs(const Tensor& a);
// Zero gradient outside (lo, hi).
Tensor clamp(const Tensor& a, double lo, double hi);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// Structure. All treat the last dimension as columns of a [rows, cols] view.
Tensor reshape(const Tensor& a, std::vector<int64_t> shape);
Tensor slice_cols(const Tensor& a, int64_t c0, int64_t c1);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor index_rows(const Tensor& a, const std::vector<int64_t>& idx);
// Normalizes each row to unit length; rows with norm < 1e-8 become `fallback`
// with zero gradient.
Tensor rownormalize(const Tensor& a, const std::vector<double>& fallback);

// Identity forward (bit-exact), blocks all gradient flow.
Tensor stop_gradient(const Tensor& a);

// 3x3 box mean over [H,W,C], zero padded.
Tensor box_filter3(const Tensor& a);

// Bilinear sample of img [H,W,C] at uv [M,2] continuous pixel coordinates
// (pixel (ix, iy) is centered at (ix+0.5, iy+0.5)). Out-of-bounds corners
// read zero;
// `valid`, when given, is set per sample to whether the full 2x2 support is
// inside the image.
Tensor bilinear_sample(const Tensor& img, const Tensor& uv,
                       std::vector<unsigned char>* valid = nullptr);

// Trilinear sample of vol [X,Y,Z,C] at coords [M,3] in grid-index space (cell
// centers at integers), zero padded.
Tensor trilinear_sample(const Tensor& vol, const Tensor& coords);

// 3D convolution, stride 1, zero padding k/2. input [X,Y,Z,Ci],
// weight [Co,Ci,k,k,k], bias [Co].
Tensor conv3d(const Tensor& input, const Tensor& weight, const Tensor& bias);

// Per-channel normalization of x [N,C]. Training mode uses batch statistics
// and updates the running buffers in place; eval mode uses the running
// buffers, which must then be non-null.
Tensor volume_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                   bool training, std::vector<double>* running_mean,
                   std::vector<double>* running_var, double momentum = 0.1);

// Test hook: scales the tanh adjoint by 1.1 to make gradient checks fail
// (negative control for the finite-difference harness).
extern bool g_corrupt_tanh_adjoint;

}  // namespace voxsplat::ad
