// Copyright 2026 The even authors
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

#ifndef EVEN_PARAMS_HPP
#define EVEN_PARAMS_HPP

#include <stdexcept>
#include <vector>

#include "even/io.hpp"
#include "even/nn.hpp"

namespace even {

inline NamedTensors export_params(std::vector<nn::ParamRef<float>> refs) {
  NamedTensors out;
  for (auto& r : refs) out[r.name] = *r.value;
  return out;
}

inline void import_params(std::vector<nn::ParamRef<float>> refs,
                          const NamedTensors& tensors) {
  for (auto& r : refs) {
    auto it = tensors.find(r.name);
    if (it == tensors.end())
      throw std::runtime_error("import_params: missing tensor " + r.name);
    if (!(it->second.shape() == r.value->shape()))
      throw std::runtime_error("import_params: shape mismatch for " + r.name);
    *r.value = it->second;
  }
}

}  // namespace even

#endif  // EVEN_PARAMS_HPP
