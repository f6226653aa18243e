#pragma once

#include "biot_solver.hpp"
#include "carleman.hpp"
#include "cli.hpp"
#include "config.hpp"
#include "core.hpp"
#include "csv.hpp"
#include "domain_grid.hpp"
#include "em_solver.hpp"
#include "galerkin_oracle.hpp"
#include "inverse.hpp"
#include "parameters.hpp"
#include "quadrature.hpp"
#include "snapshot.hpp"
#include "stability_probe.hpp"
#include "staggered.hpp"
