#pragma once

namespace hostguard {

inline constexpr const char* kArtifactVersion = "1.0.0";
inline constexpr const char* kWireMagic = "HGEV1";
inline constexpr const char* kTraceMagic = "HGTRC1";
inline constexpr const char* kSigMagic = "HGSIG1";

} // namespace hostguard
