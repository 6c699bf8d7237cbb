#pragma once

// Umbrella header: probabilistic multivariate forecasting with a jointly
// trained autoencoder, recurrent conditioner and conditional normalizing flow.

#include "latte/checkpoint.hpp"
#include "latte/data.hpp"
#include "latte/errors.hpp"
#include "latte/evaluate.hpp"
#include "latte/flow.hpp"
#include "latte/io.hpp"
#include "latte/metrics.hpp"
#include "latte/model.hpp"
#include "latte/nn.hpp"
#include "latte/rng.hpp"
#include "latte/tape.hpp"
#include "latte/tensor.hpp"
