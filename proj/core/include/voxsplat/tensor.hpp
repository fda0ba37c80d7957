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
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace voxsplat::ad {

class Tensor;

/// One value in the computation graph. Shared between the Tensor handles that
/// reference it; grad lives here so parameter gradients survive tape teardown.
struct Node {
  std::vector<int64_t> shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Propagates this node's grad into its parents. Empty for leaves.
  std::function<void(Node&)> backward_fn;

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  double* grad_data();  // allocates a zero buffer on first use
  void accumulate(const double* g, int64_t n);
};

using NodePtr = std::shared_ptr<Node>;

/// Value-semantics handle over a graph node. All math lives in ops.hpp; when a
/// Tape is active and an input requires grad, ops record their adjoints there.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<int64_t> shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(std::vector<int64_t> shape, bool requires_grad = false);
  static Tensor full(std::vector<int64_t> shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor randn(std::vector<int64_t> shape, std::mt19937_64& rng, double stddev = 1.0,
                      bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int64_t>& shape() const { return node_->shape; }
  int64_t numel() const { return node_->numel(); }
  int64_t dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }

  const double* data() const { return node_->data.data(); }
  double* mutable_data() { return node_->data.data(); }
  const std::vector<double>& values() const { return node_->data; }

  bool requires_grad() const { return node_->requires_grad; }
  /// Gradient buffer; zero-filled if nothing has been accumulated yet.
  const double* grad() const;
  void zero_grad();

  double item() const;

  NodePtr node() const { return node_; }
  explicit Tensor(NodePtr n) : node_(std::move(n)) {}

 private:
  NodePtr node_;
};

/// Ordered record of the primitive ops executed while it is active. One tape
/// per training step; nested tapes are not supported.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();
  void record(NodePtr n) { records_.push_back(std::move(n)); }
  size_t size() const { return records_.size(); }

  /// Reverse sweep from a scalar loss recorded on this tape. Leaf gradients
  /// accumulate additively; callers zero them between steps.
  void backward(const Tensor& loss);

 private:
  std::vector<NodePtr> records_;
};

/// Builds a recorded op node. `backward` receives the finished node; it reads
/// node.grad and accumulates into the captured parents. Ops whose inputs are
/// all constant skip recording and drop the closure.
Tensor make_op(std::vector<int64_t> shape, std::vector<double> data,
               const std::vector<Tensor>& inputs, std::function<void(Node&)> backward);

[[noreturn]] void shape_error(const std::string& op, const std::string& detail);

}  // namespace voxsplat::ad
