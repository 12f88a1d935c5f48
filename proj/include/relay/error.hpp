// Copyright 2026 The Relay Authors. All Rights Reserved.
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

#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace relay {

enum class Errc {
  MalformedRecord,
  InsufficientData,
  BadWindow,
  BadCue,
  BadPosition,
  MisalignedInputs,
  EmptySelection,
  EndpointError,
  MalformedResponse,
  UnsupportedCapability,
  ModelNotFound,
  BadRequest,
  SessionClosed,
  ProtocolViolation,
  ScriptMiss,
  BadCostModel,
  EmptyTranscript,
  EmptyInput,
  AbortedSession,
  BadConfig,
  IoError,
};

inline constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::MalformedRecord: return "MalformedRecord";
    case Errc::InsufficientData: return "InsufficientData";
    case Errc::BadWindow: return "BadWindow";
    case Errc::BadCue: return "BadCue";
    case Errc::BadPosition: return "BadPosition";
    case Errc::MisalignedInputs: return "MisalignedInputs";
    case Errc::EmptySelection: return "EmptySelection";
    case Errc::EndpointError: return "EndpointError";
    case Errc::MalformedResponse: return "MalformedResponse";
    case Errc::UnsupportedCapability: return "UnsupportedCapability";
    case Errc::ModelNotFound: return "ModelNotFound";
    case Errc::BadRequest: return "BadRequest";
    case Errc::SessionClosed: return "SessionClosed";
    case Errc::ProtocolViolation: return "ProtocolViolation";
    case Errc::ScriptMiss: return "ScriptMiss";
    case Errc::BadCostModel: return "BadCostModel";
    case Errc::EmptyTranscript: return "EmptyTranscript";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::AbortedSession: return "AbortedSession";
    case Errc::BadConfig: return "BadConfig";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

inline std::optional<Errc> errc_from_string(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(Errc::IoError); ++i) {
    auto code = static_cast<Errc>(i);
    if (to_string(code) == name) return code;
  }
  return std::nullopt;
}

/// Every failure surfaced by the library. `position()` is set when the error
/// can be pinned to a token index (malformed trace records, bad windows).
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message,
        std::optional<std::size_t> position = std::nullopt)
      : std::runtime_error(format(code, message, position)),
        code_(code),
        position_(position) {}

  Errc code() const noexcept { return code_; }
  std::optional<std::size_t> position() const noexcept { return position_; }

 private:
  static std::string format(Errc code, const std::string& message,
                            std::optional<std::size_t> position) {
    std::string out(to_string(code));
    if (position) out += " at position " + std::to_string(*position);
    if (!message.empty()) out += ": " + message;
    return out;
  }

  Errc code_;
  std::optional<std::size_t> position_;
};

}  // namespace relay
