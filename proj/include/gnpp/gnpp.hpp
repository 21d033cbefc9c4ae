#pragma once

// Umbrella header for the whole library.

#include "gnpp/analysis.hpp"
#include "gnpp/arch.hpp"
#include "gnpp/checkpoint.hpp"
#include "gnpp/data.hpp"
#include "gnpp/gradcheck.hpp"
#include "gnpp/network.hpp"
#include "gnpp/ops.hpp"
#include "gnpp/optim.hpp"
#include "gnpp/phrase_pool.hpp"
#include "gnpp/rng.hpp"
#include "gnpp/tensor.hpp"
#include "gnpp/train.hpp"
