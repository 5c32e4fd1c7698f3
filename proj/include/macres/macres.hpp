#pragma once

#include "macres/rng.hpp"
#include "macres/probcore.hpp"
#include "macres/polar.hpp"
#include "macres/hashing.hpp"
#include "macres/ratesplit.hpp"
#include "macres/encoder.hpp"
#include "macres/evaluator.hpp"
#include "macres/io.hpp"
#include "macres/log.hpp"
#include "macres/experiment.hpp"
