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

// JSON-over-HTTP POST with retries and exponential backoff.

#ifndef LEADWISE_HTTP_H_
#define LEADWISE_HTTP_H_

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace leadwise {

class HttpError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct HttpOptions {
  double timeout_seconds = 60.0;
  int max_retries = 3;           // attempts after the first one
  int initial_backoff_ms = 250;  // doubled after every failed attempt
  std::vector<std::pair<std::string, std::string>> headers;
};

// POSTs `body` to `url` (http:// or https://) and parses the JSON response.
// Transport failures, 5xx and 429 responses are retried; other statuses and
// unparseable bodies fail immediately. Throws HttpError.
nlohmann::json post_json(const std::string& url, const nlohmann::json& body,
                         const HttpOptions& options);

}  // namespace leadwise

#endif  // LEADWISE_HTTP_H_
