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

#include "leadwise/checkpoint.h"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "leadwise/hashing.h"

namespace leadwise::nn {
namespace {

constexpr char kMagic[8] = {'L', 'W', 'C', 'K', 'P', 'T', '0', '1'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

void put_f32(std::string& out, float f) {
  const std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

float get_f32(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return std::bit_cast<float>(bits);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<NamedTensor>& params,
                     const std::string& config_hash,
                     const nlohmann::json& meta) {
  nlohmann::json header;
  header["format"] = 1;
  header["config_hash"] = config_hash;
  header["meta"] = meta;
  header["tensors"] = nlohmann::json::array();
  std::string payload;
  std::size_t offset = 0;
  for (const NamedTensor& p : params) {
    header["tensors"].push_back({{"name", p.name},
                                 {"shape", p.tensor.shape()},
                                 {"offset", offset},
                                 {"count", p.tensor.size()}});
    for (double v : p.tensor.values()) put_f32(payload, static_cast<float>(v));
    offset += p.tensor.size();
  }
  const std::string header_text = header.dump();
  std::string blob(kMagic, sizeof(kMagic));
  put_u64(blob, header_text.size());
  blob += header_text;
  blob += payload;

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw CheckpointError("short write to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::string blob((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());
  if (blob.size() < 16 || std::memcmp(blob.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError(path.string() + ": not a checkpoint file");
  }
  const std::uint64_t header_len = get_u64(bytes + 8);
  if (16 + header_len > blob.size()) {
    throw CheckpointError(path.string() + ": truncated header");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(blob.substr(16, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(path.string() + ": bad header: " + e.what());
  }
  const std::size_t payload_start = 16 + header_len;
  const std::size_t payload_floats = (blob.size() - payload_start) / 4;

  Checkpoint ckpt;
  ckpt.config_hash = header.value("config_hash", "");
  ckpt.meta = header.value("meta", nlohmann::json::object());
  for (const auto& t : header.at("tensors")) {
    CheckpointTensor ct;
    ct.name = t.at("name").get<std::string>();
    ct.shape = t.at("shape").get<Shape>();
    const std::size_t offset = t.at("offset").get<std::size_t>();
    const std::size_t count = t.at("count").get<std::size_t>();
    if (count != shape_size(ct.shape) || offset + count > payload_floats) {
      throw CheckpointError(path.string() + ": inconsistent entry " + ct.name);
    }
    ct.values.resize(count);
    const unsigned char* base = bytes + payload_start + 4 * offset;
    for (std::size_t i = 0; i < count; ++i) ct.values[i] = get_f32(base + 4 * i);
    ckpt.tensors.push_back(std::move(ct));
  }
  return ckpt;
}

void restore_parameters(const Checkpoint& ckpt,
                        const std::vector<NamedTensor>& params) {
  for (const NamedTensor& p : params) {
    const CheckpointTensor* found = nullptr;
    for (const CheckpointTensor& ct : ckpt.tensors) {
      if (ct.name == p.name) {
        found = &ct;
        break;
      }
    }
    if (found == nullptr) throw CheckpointError("checkpoint lacks " + p.name);
    if (found->shape != p.tensor.shape()) {
      throw CheckpointError("shape mismatch for " + p.name + ": checkpoint " +
                            shape_string(found->shape) + ", model " +
                            shape_string(p.tensor.shape()));
    }
    Tensor t = p.tensor;
    auto values = t.mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = found->values[i];
  }
}

std::string parameter_hash(const std::vector<NamedTensor>& params) {
  std::uint64_t h = fnv1a64(std::string_view{});
  for (const NamedTensor& p : params) {
    h = fnv1a64(p.name, h);
    h = fnv1a64(shape_string(p.tensor.shape()), h);
    h = fnv1a64(p.tensor.values(), h);
  }
  return hex64(h);
}

}  // namespace leadwise::nn
