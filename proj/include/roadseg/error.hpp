/* Copyright 2026 The roadseg Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <stdexcept>
#include <string>

namespace roadseg {

// Base of every exception raised by the engine. Callers that only care about
// "something failed" catch this; the CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor dimensions or kernel hyperparameters.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Graph construction failed, e.g. a layer would produce an empty output.
class GraphError : public Error {
 public:
  using Error::Error;
};

// Weight slots could not be bound to a store.
class BindError : public Error {
 public:
  using Error::Error;
};

// Malformed or unreadable input data (images, masks, directories).
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace roadseg
