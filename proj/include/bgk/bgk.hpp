#pragma once

#include "bgk/checkpoint.hpp"
#include "bgk/diagnostics.hpp"
#include "bgk/errors.hpp"
#include "bgk/linearized.hpp"
#include "bgk/maxwellian.hpp"
#include "bgk/phase_grid.hpp"
#include "bgk/scenario.hpp"
#include "bgk/solver.hpp"
#include "bgk/spectral.hpp"
#include "bgk/transport.hpp"
