#pragma once

// Umbrella header: the stagewise solver library.

#include "stagewise/duality.hpp"
#include "stagewise/engine.hpp"
#include "stagewise/instances/isotonic.hpp"
#include "stagewise/instances/network.hpp"
#include "stagewise/instances/toy.hpp"
#include "stagewise/optim.hpp"
#include "stagewise/problem.hpp"
#include "stagewise/types.hpp"
#include "stagewise/validate.hpp"
