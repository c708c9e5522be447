#pragma once

#include "kppw/error.hpp"
#include "kppw/matrix.hpp"
#include "kppw/spectral.hpp"
#include "kppw/dispersion.hpp"
#include "kppw/kinetics.hpp"
#include "kppw/field.hpp"
#include "kppw/pde_sim.hpp"
#include "kppw/diagnostics.hpp"
#include "kppw/scenarios.hpp"
#include "kppw/config.hpp"
