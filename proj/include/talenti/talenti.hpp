#pragma once

#include "talenti/error.hpp"
#include "talenti/quadrature.hpp"
#include "talenti/geometry.hpp"
#include "talenti/mesh_io.hpp"
#include "talenti/fem.hpp"
#include "talenti/newton.hpp"
#include "talenti/plaplace.hpp"
#include "talenti/rearrangement.hpp"
#include "talenti/radial.hpp"
#include "talenti/comparison.hpp"
#include "talenti/scenario.hpp"
