#pragma once

#include "rstein/gaussian.hpp"
#include "rstein/mc.hpp"
#include "rstein/mdp.hpp"
#include "rstein/numeric.hpp"
#include "rstein/rng.hpp"
#include "rstein/subgraph.hpp"
#include "rstein/table.hpp"
#include "rstein/two_runs.hpp"
#include "rstein/verify.hpp"
#include "rstein/walsh.hpp"
