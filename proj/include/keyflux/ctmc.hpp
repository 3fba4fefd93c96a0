#pragma once

#include "keyflux/ctmc/ctmc.hpp"
#include "keyflux/ctmc/poisson.hpp"
#include "keyflux/ctmc/steady_state.hpp"
#include "keyflux/ctmc/transient.hpp"
