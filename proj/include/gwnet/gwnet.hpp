#pragma once

// Umbrella header for the whole library.

#include "gwnet/augment.hpp"
#include "gwnet/data_io.hpp"
#include "gwnet/error.hpp"
#include "gwnet/gradcheck.hpp"
#include "gwnet/layers.hpp"
#include "gwnet/lstm.hpp"
#include "gwnet/model.hpp"
#include "gwnet/optim.hpp"
#include "gwnet/rng.hpp"
#include "gwnet/sampler.hpp"
#include "gwnet/synthetic.hpp"
#include "gwnet/tensor.hpp"
#include "gwnet/training.hpp"
#include "gwnet/verify.hpp"
