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

#include "mvkd/tape.hpp"

#include <cmath>

#include "mvkd/error.hpp"

namespace mvkd {

namespace {

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace

Tape::Id Tape::leaf(std::string name, std::vector<double> value) {
  if (!all_finite(value)) throw NonFiniteError(name);
  nodes_.push_back({std::move(name), std::move(value), {}, nullptr, {}});
  return static_cast<Id>(nodes_.size() - 1);
}

Tape::Id Tape::record(std::string name, std::vector<double> value, std::vector<Id> inputs,
                      Backward backward) {
  if (!all_finite(value)) throw NonFiniteError(name);
  nodes_.push_back(
      {std::move(name), std::move(value), {}, std::move(backward), std::move(inputs)});
  return static_cast<Id>(nodes_.size() - 1);
}

std::span<double> Tape::grad(Id id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

void Tape::backward(Id root) {
  if (nodes_[root].value.size() != 1) throw ValidationError("tape: backward root must be scalar");
  for (auto& n : nodes_) n.grad.clear();
  grad(root)[0] = 1.0;
  for (Id id = root; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.grad.empty() || !n.backward) continue;
    n.backward(*this, id);
    for (Id in : nodes_[id].inputs) {
      if (!all_finite(nodes_[in].grad)) throw NonFiniteError(nodes_[id].name + " (backward)");
    }
  }
}

}  // namespace mvkd
