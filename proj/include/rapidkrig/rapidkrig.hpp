#pragma once

#include "rapidkrig/bessel.hpp"
#include "rapidkrig/circulant.hpp"
#include "rapidkrig/conditional_sim.hpp"
#include "rapidkrig/covariance.hpp"
#include "rapidkrig/errors.hpp"
#include "rapidkrig/exact_kriging.hpp"
#include "rapidkrig/gridding.hpp"
#include "rapidkrig/random.hpp"
#include "rapidkrig/rapid_predictor.hpp"
