// Copyright 2026 The Leadwise Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Parameter checkpoint file:
//
//   bytes [0, 8)    magic "LWCKPT01"
//   bytes [8, 16)   header length H, uint64 little-endian
//   bytes [16, 16+H) UTF-8 JSON header:
//       {"format": 1, "config_hash": "...", "meta": {...},
//        "tensors": [{"name": ..., "shape": [...], "offset": ..., "count": ...}]}
//   remainder       float32 little-endian payload; "offset" is in floats
//                   from the start of the payload.

#ifndef LEADWISE_CHECKPOINT_H_
#define LEADWISE_CHECKPOINT_H_

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "leadwise/layers.h"

namespace leadwise::nn {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CheckpointTensor {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

struct Checkpoint {
  std::string config_hash;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<CheckpointTensor> tensors;
};

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<NamedTensor>& params,
                     const std::string& config_hash,
                     const nlohmann::json& meta);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies checkpoint values into `params`. Every parameter must be present
// with a matching shape.
void restore_parameters(const Checkpoint& ckpt,
                        const std::vector<NamedTensor>& params);

// Fingerprint of names, shapes and values.
std::string parameter_hash(const std::vector<NamedTensor>& params);

}  // namespace leadwise::nn

#endif  // LEADWISE_CHECKPOINT_H_
