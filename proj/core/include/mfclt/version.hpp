#pragma once

namespace mfclt {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace mfclt
