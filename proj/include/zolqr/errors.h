// Copyright 2026 The zolqr Authors
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

#ifndef ZOLQR_ERRORS_H_
#define ZOLQR_ERRORS_H_

#include <stdexcept>
#include <string>

namespace zolqr {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed arguments: wrong dimensions, non-finite entries, bad options.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// An operation that requires rho(A - BK) < 1 was handed a gain that is not.
class NotStabilizing : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

// The Riccati iteration failed; (A, B) is treated as not stabilizable or
// (A, Q^{1/2}) as not detectable.
class NotStabilizable : public Error {
 public:
  using Error::Error;
};

class EstimationFailed : public Error {
 public:
  using Error::Error;
};

class InvalidTolerance : public Error {
 public:
  using Error::Error;
};

class FitFailed : public Error {
 public:
  using Error::Error;
};

class ExperimentFailed : public Error {
 public:
  using Error::Error;
};

}  // namespace zolqr

#endif  // ZOLQR_ERRORS_H_
