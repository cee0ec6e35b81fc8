#pragma once

// Umbrella header for the risk-aware estimation toolkit: generative models
// with moment oracles, the optimal estimator family, mse/sev functionals,
// frontier scans, margin bounds, and skewness diagnostics.

#include "riskmse/errors.hpp"
#include "riskmse/estimators.hpp"
#include "riskmse/experiment.hpp"
#include "riskmse/functionals.hpp"
#include "riskmse/margin.hpp"
#include "riskmse/model.hpp"
#include "riskmse/models/exp_noise.hpp"
#include "riskmse/models/gaussian.hpp"
#include "riskmse/models/hidden.hpp"
#include "riskmse/models/lognormal_mult.hpp"
#include "riskmse/models/sample_file.hpp"
#include "riskmse/moments.hpp"
#include "riskmse/numerics/algebra.hpp"
#include "riskmse/numerics/quadrature.hpp"
#include "riskmse/numerics/rng.hpp"
#include "riskmse/numerics/stats.hpp"
#include "riskmse/skewness.hpp"
#include "riskmse/tradeoff.hpp"
#include "riskmse/version.hpp"
