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

#include <chrono>
#include <ctime>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "eagernet/digest.hpp"
#include "eagernet/version.hpp"

// Every artifact-producing command writes `<output>.manifest.json` recording
// the tool version, the resolved configuration, input/output digests, the
// seed and the wall-clock duration, so runs can be audited and reproduced.

namespace eagernet {

class RunManifest {
 public:
  RunManifest(std::string subcommand, uint64_t seed)
      : start_(std::chrono::steady_clock::now()) {
    j_["tool"] = "eagernet";
    j_["version"] = kToolVersion;
    j_["subcommand"] = std::move(subcommand);
    j_["seed"] = seed;
    j_["inputs"] = nlohmann::json::object();
    j_["outputs"] = nlohmann::json::object();
  }

  void add_input(const std::string& path) {
    j_["inputs"][path] = "fnv64:" + hex64(fnv1a64_file(path));
  }

  void add_output(const std::string& path) {
    j_["outputs"][path] = "fnv64:" + hex64(fnv1a64_file(path));
  }

  void set_config(nlohmann::json config) { j_["config"] = std::move(config); }

  // Writes `<primary_output>.manifest.json`.
  void write(const std::string& primary_output) {
    const auto elapsed = std::chrono::steady_clock::now() - start_;
    j_["duration_seconds"] =
        std::chrono::duration_cast<std::chrono::duration<double>>(elapsed).count();
    const std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    j_["created_utc"] = buf;
    std::ofstream out(primary_output + ".manifest.json", std::ios::trunc);
    out << j_.dump(2) << '\n';
  }

 private:
  nlohmann::json j_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace eagernet
