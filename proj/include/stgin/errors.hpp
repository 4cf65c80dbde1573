/*
 * Copyright 2026 The stgin authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace stgin {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unreadable/unwritable files, truncated streams.
struct IoError : Error {
  using Error::Error;
};

// Malformed input records, bad config keys, bad CLI values.
struct ParseError : Error {
  using Error::Error;
};

// Tensor shape disagreements; message names both shapes.
struct ShapeError : Error {
  using Error::Error;
};

// CRC mismatch on a binary artifact.
struct ChecksumError : Error {
  using Error::Error;
};

// Unknown user/poi/cell, or checkpoint/graph vocab disagreement.
struct VocabError : Error {
  using Error::Error;
};

// Non-finite loss or gradient during training.
struct NumericError : Error {
  using Error::Error;
};

}  // namespace stgin
