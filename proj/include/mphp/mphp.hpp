#pragma once

// Multivariate periodic Hawkes processes: model, MAP-EM estimation,
// thinning simulation, periodic Poisson baseline, evaluation and file I/O.

#include <mphp/baseline.hpp>
#include <mphp/error.hpp>
#include <mphp/estimation.hpp>
#include <mphp/evaluation.hpp>
#include <mphp/events.hpp>
#include <mphp/io.hpp>
#include <mphp/model.hpp>
#include <mphp/params.hpp>
#include <mphp/random.hpp>
#include <mphp/simulation.hpp>
