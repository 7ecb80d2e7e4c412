// Copyright (C) 2026 The fusionsearch Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except in compliance
// with the License. You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software distributed under the License
// is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express
// or implied. See the License for the specific language governing permissions and limitations under the License.

#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace fusion {

// Standard alphabet, '=' padded.
std::string base64_encode(std::string_view bytes);

// Returns nullopt on malformed input. Whitespace is not accepted.
std::optional<std::string> base64_decode(std::string_view text);

}  // namespace fusion
