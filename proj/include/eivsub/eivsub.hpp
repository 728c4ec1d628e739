#pragma once

#include "eivsub/bench.hpp"
#include "eivsub/eiv_core.hpp"
#include "eivsub/errors.hpp"
#include "eivsub/ingest.hpp"
#include "eivsub/linalg.hpp"
#include "eivsub/perturb.hpp"
#include "eivsub/rng.hpp"
#include "eivsub/sampling.hpp"
#include "eivsub/simgen.hpp"
#include "eivsub/subsample.hpp"
#include "eivsub/types.hpp"
