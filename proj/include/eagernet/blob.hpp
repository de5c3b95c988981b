/*
 * Copyright 2026 The eagernet authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "eagernet/digest.hpp"
#include "eagernet/errors.hpp"

// Shared on-disk container for the model file and the dataset bundle:
//
//   magic (4 bytes) | version (u16 LE) | header length (u32 LE) |
//   JSON header | payload
//
// The header carries an FNV-1a 64 checksum of the payload. Readers refuse
// unknown versions and report the byte offset of any truncation.

namespace eagernet {

inline void put_u16_le(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v));
  out.push_back(static_cast<uint8_t>(v >> 8));
}

inline void put_u32_le(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

inline void put_f64_le(std::vector<uint8_t>& out, double v) {
  uint64_t bits = std::bit_cast<uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(bits >> (8 * i)));
}

inline double get_f64_le(std::span<const uint8_t> in, size_t offset) {
  uint64_t bits = 0;
  for (int i = 0; i < 8; ++i)
    bits |= static_cast<uint64_t>(in[offset + i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

struct BlobFile {
  uint16_t version = 0;
  nlohmann::json header;
  std::vector<uint8_t> payload;
};

inline std::vector<uint8_t> encode_blob(const char magic[4], uint16_t version,
                                        nlohmann::json header,
                                        std::vector<uint8_t> payload) {
  header["payload_fnv64"] = hex64(fnv1a64(payload));
  const std::string hdr = header.dump();
  std::vector<uint8_t> out;
  out.reserve(10 + hdr.size() + payload.size());
  out.insert(out.end(), magic, magic + 4);
  put_u16_le(out, version);
  put_u32_le(out, static_cast<uint32_t>(hdr.size()));
  out.insert(out.end(), hdr.begin(), hdr.end());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

inline BlobFile decode_blob(std::span<const uint8_t> bytes, const char magic[4],
                            uint16_t max_version, const std::string& name) {
  auto truncated = [&](size_t offset, const std::string& what) {
    return DataError(name + ": truncated at byte offset " + std::to_string(offset) +
                     " (" + what + ")");
  };
  if (bytes.size() < 10) throw truncated(bytes.size(), "container preamble");
  if (!std::equal(magic, magic + 4, bytes.begin()))
    throw DataError(name + ": bad magic bytes at offset 0");
  BlobFile f;
  f.version = static_cast<uint16_t>(bytes[4] | (bytes[5] << 8));
  if (f.version == 0 || f.version > max_version)
    throw DataError(name + ": unsupported format version " +
                    std::to_string(f.version) + " (supported: 1.." +
                    std::to_string(max_version) + ")");
  uint32_t hdr_len = 0;
  for (int i = 0; i < 4; ++i) hdr_len |= static_cast<uint32_t>(bytes[6 + i]) << (8 * i);
  if (bytes.size() < 10 + static_cast<size_t>(hdr_len))
    throw truncated(bytes.size(), "JSON header");
  try {
    f.header = nlohmann::json::parse(bytes.begin() + 10, bytes.begin() + 10 + hdr_len);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(name + ": corrupt JSON header at offset 10: " + e.what());
  }
  f.payload.assign(bytes.begin() + 10 + hdr_len, bytes.end());
  if (f.header.contains("payload_fnv64")) {
    const std::string want = f.header.at("payload_fnv64").get<std::string>();
    const std::string got = hex64(fnv1a64(f.payload));
    if (want != got)
      throw DataError(name + ": payload checksum mismatch at offset " +
                      std::to_string(10 + hdr_len) + " (header " + want +
                      ", payload " + got + ")");
  }
  return f;
}

inline void write_file_bytes(const std::string& path, std::span<const uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path);
}

inline std::vector<uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw DataError("cannot open: " + path);
  const std::streamsize size = in.tellg();
  in.seekg(0);
  std::vector<uint8_t> bytes(static_cast<size_t>(size));
  if (size > 0) in.read(reinterpret_cast<char*>(bytes.data()), size);
  if (!in) throw DataError("read failed: " + path);
  return bytes;
}

}  // namespace eagernet
