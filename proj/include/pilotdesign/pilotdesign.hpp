#pragma once

#include "pilotdesign/criteria.hpp"
#include "pilotdesign/design.hpp"
#include "pilotdesign/fpca.hpp"
#include "pilotdesign/hybrid.hpp"
#include "pilotdesign/io.hpp"
#include "pilotdesign/rng.hpp"
#include "pilotdesign/search.hpp"
#include "pilotdesign/simulate.hpp"
#include "pilotdesign/types.hpp"
