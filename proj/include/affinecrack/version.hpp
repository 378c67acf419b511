#pragma once

namespace affinecrack {

inline constexpr const char* kVersion = "0.1.0";

// Identifier of the random stream recorded in dataset manifests. Datasets are
// byte-reproducible across builds that share this algorithm.
inline constexpr const char* kRngAlgorithm = "mt19937_64/afc-v1";

}  // namespace affinecrack
