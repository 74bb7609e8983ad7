#pragma once

namespace vrap {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kWeightsFormatVersion = 1;
inline constexpr int kReportSchemaVersion = 1;

}  // namespace vrap
