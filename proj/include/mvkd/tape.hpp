// Copyright 2026 The mvkd Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace mvkd {

// Reverse-mode trace over flat double arrays. Each recorded op owns its
// output value and a closure that, given the output gradient, accumulates
// into its inputs' gradients.
class Tape {
 public:
  using Id = int;
  using Backward = std::function<void(Tape&, Id self)>;

  // Leaves carry no backward closure.
  Id leaf(std::string name, std::vector<double> value);
  // inputs lists every node the closure writes gradients into. Throws
  // NonFiniteError(name) if any output entry is NaN or infinite.
  Id record(std::string name, std::vector<double> value, std::vector<Id> inputs,
            Backward backward);

  std::span<const double> value(Id id) const { return nodes_[id].value; }
  double scalar(Id id) const { return nodes_[id].value.at(0); }
  const std::string& name(Id id) const { return nodes_[id].name; }
  size_t size() const { return nodes_.size(); }

  // Gradient buffer of a node, zero-initialized on first access.
  std::span<double> grad(Id id);
  bool has_grad(Id id) const { return !nodes_[id].grad.empty(); }

  // Seeds d(root)/d(root) = 1 and runs every closure in reverse record order.
  // Throws NonFiniteError naming the op whose adjoint produced a non-finite
  // gradient.
  void backward(Id root);

 private:
  struct Node {
    std::string name;
    std::vector<double> value;
    std::vector<double> grad;
    Backward backward;
    std::vector<Id> inputs;
  };
  std::vector<Node> nodes_;
};

}  // namespace mvkd
