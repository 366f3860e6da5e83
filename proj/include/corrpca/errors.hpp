// Copyright 2026 The corrpca Authors. All Rights Reserved.
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

#include <stdexcept>
#include <string>
#include <string_view>

namespace corrpca {

enum class Errc {
  rank_deficient,
  dimension_mismatch,
  not_symmetric,
  invalid_rank,
  no_complement,
  invalid_support,
  not_isotropic,
  corollary_inapplicable,
  invalid_example,
  support_degenerate,
  empty_batch,
  infeasible,
  config_error,
  validation_error,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::rank_deficient: return "RankDeficient";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::not_symmetric: return "NotSymmetric";
    case Errc::invalid_rank: return "InvalidRank";
    case Errc::no_complement: return "NoComplement";
    case Errc::invalid_support: return "InvalidSupport";
    case Errc::not_isotropic: return "NotIsotropic";
    case Errc::corollary_inapplicable: return "CorollaryInapplicable";
    case Errc::invalid_example: return "InvalidExample";
    case Errc::support_degenerate: return "SupportDegenerate";
    case Errc::empty_batch: return "EmptyBatch";
    case Errc::infeasible: return "Infeasible";
    case Errc::config_error: return "ConfigError";
    case Errc::validation_error: return "ValidationError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace corrpca
