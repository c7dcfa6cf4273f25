#pragma once

#include "hmmcd/adversary.hpp"
#include "hmmcd/corpus.hpp"
#include "hmmcd/detectors.hpp"
#include "hmmcd/discrete_model.hpp"
#include "hmmcd/error.hpp"
#include "hmmcd/finite_game.hpp"
#include "hmmcd/gaussian_model.hpp"
#include "hmmcd/model.hpp"
#include "hmmcd/monte_carlo.hpp"
#include "hmmcd/numerics.hpp"
#include "hmmcd/random.hpp"
#include "hmmcd/shewhart.hpp"
#include "hmmcd/shewhart_discrete.hpp"
#include "hmmcd/shewhart_gaussian.hpp"
#include "hmmcd/theorems.hpp"
