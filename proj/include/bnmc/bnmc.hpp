#pragma once

#include "bnmc/aa_estimator.hpp"
#include "bnmc/bench.hpp"
#include "bnmc/bounded_variance.hpp"
#include "bnmc/errors.hpp"
#include "bnmc/exact.hpp"
#include "bnmc/io.hpp"
#include "bnmc/network.hpp"
#include "bnmc/random.hpp"
#include "bnmc/sampler.hpp"
#include "bnmc/stopping_rules.hpp"
#include "bnmc/stratification.hpp"
