// tdnp.hpp - umbrella header.
#pragma once

#include "tdnp/analysis.hpp"
#include "tdnp/commands.hpp"
#include "tdnp/errors.hpp"
#include "tdnp/io/config.hpp"
#include "tdnp/io/curve_csv.hpp"
#include "tdnp/ise_engine.hpp"
#include "tdnp/kinetics.hpp"
#include "tdnp/triplet_spin.hpp"
#include "tdnp/units.hpp"
