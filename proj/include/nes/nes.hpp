#pragma once

#include "nes/effect_estimators.hpp"
#include "nes/error.hpp"
#include "nes/evaluation.hpp"
#include "nes/harness.hpp"
#include "nes/hypothesis_tests.hpp"
#include "nes/io.hpp"
#include "nes/neural_effect_search.hpp"
#include "nes/neural_effect_test.hpp"
#include "nes/numerics.hpp"
#include "nes/rng.hpp"
#include "nes/synthetic_dgp.hpp"
#include "nes/types.hpp"
