#pragma once

// Umbrella header: affine cipher key recovery with a hybrid
// modular/statistical network and a chi-square brute-force baseline.

#include "affinecrack/affine.hpp"
#include "affinecrack/attack.hpp"
#include "affinecrack/corpus.hpp"
#include "affinecrack/errors.hpp"
#include "affinecrack/io.hpp"
#include "affinecrack/network.hpp"
#include "affinecrack/rng.hpp"
#include "affinecrack/tensor.hpp"
#include "affinecrack/trainer.hpp"
#include "affinecrack/version.hpp"
