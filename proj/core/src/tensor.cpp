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

#include "voxsplat/tensor.hpp"

#include <numeric>
#include <stdexcept>

namespace voxsplat::ad {

namespace {

Tape* g_active_tape = nullptr;

int64_t shape_numel(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

}  // namespace

double* Node::grad_data() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
  return grad.data();
}

void Node::accumulate(const double* g, int64_t n) {
  double* dst = grad_data();
  for (int64_t i = 0; i < n; ++i) dst[i] += g[i];
}

Tensor::Tensor(std::vector<int64_t> shape, std::vector<double> data, bool requires_grad) {
  if (shape_numel(shape) != static_cast<int64_t>(data.size())) {
    throw std::invalid_argument("Tensor: data length does not match shape");
  }
  node_ = std::make_shared<Node>();
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(std::vector<int64_t> shape, bool requires_grad) {
  std::vector<double> d(static_cast<size_t>(shape_numel(shape)), 0.0);
  return Tensor(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::full(std::vector<int64_t> shape, double value, bool requires_grad) {
  std::vector<double> d(static_cast<size_t>(shape_numel(shape)), value);
  return Tensor(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

Tensor Tensor::randn(std::vector<int64_t> shape, std::mt19937_64& rng, double stddev,
                     bool requires_grad) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> d(static_cast<size_t>(shape_numel(shape)));
  for (double& v : d) v = dist(rng);
  return Tensor(std::move(shape), std::move(d), requires_grad);
}

const double* Tensor::grad() const { return node_->grad_data(); }

void Tensor::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

double Tensor::item() const {
  if (numel() != 1) throw std::invalid_argument("Tensor::item: not a scalar");
  return node_->data[0];
}

Tape::Tape() {
  if (g_active_tape != nullptr) {
    throw std::logic_error("Tape: nested tapes are not supported");
  }
  g_active_tape = this;
}

Tape::~Tape() { g_active_tape = nullptr; }

Tape* Tape::active() { return g_active_tape; }

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw std::invalid_argument("backward: loss must be a scalar");
  }
  NodePtr loss_node = loss.node();
  bool on_tape = false;
  for (const NodePtr& n : records_) {
    if (n == loss_node) {
      on_tape = true;
      break;
    }
  }
  if (!on_tape) {
    throw std::invalid_argument("backward: loss was not produced on the active tape");
  }
  loss_node->grad.assign(1, 1.0);
  // Records are in execution order, so the reverse walk is reverse-topological
  // and every consumer has finished accumulating before a node is visited.
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    Node& n = **it;
    if (n.grad.empty() || !n.backward_fn) continue;
    n.backward_fn(n);
  }
}

Tensor make_op(std::vector<int64_t> shape, std::vector<double> data,
               const std::vector<Tensor>& inputs, std::function<void(Node&)> backward) {
  Tensor out(std::move(shape), std::move(data), false);
  Tape* tape = Tape::active();
  if (tape == nullptr) return out;
  bool any_grad = false;
  for (const Tensor& in : inputs) {
    if (in.requires_grad()) {
      any_grad = true;
      break;
    }
  }
  if (!any_grad) return out;
  NodePtr n = out.node();
  n->requires_grad = true;
  n->parents.reserve(inputs.size());
  for (const Tensor& in : inputs) n->parents.push_back(in.node());
  n->backward_fn = std::move(backward);
  tape->record(n);
  return out;
}

void shape_error(const std::string& op, const std::string& detail) {
  throw std::invalid_argument(op + ": " + detail);
}

}  // namespace voxsplat::ad
