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

#include <stdexcept>
#include <string>

namespace mvkd {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition or invariant failure on user-supplied data.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Degenerate projective configurations (points on the camera plane,
// underdetermined triangulation, collinear point sets).
class GeometryError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Raised by the training forward pass when an op produces NaN or Inf.
class NonFiniteError : public Error {
 public:
  explicit NonFiniteError(std::string op)
      : Error("non-finite value produced by op '" + op + "'"), op_(std::move(op)) {}
  const std::string& op() const { return op_; }

 private:
  std::string op_;
};

}  // namespace mvkd
