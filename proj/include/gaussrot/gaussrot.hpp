#pragma once

#include "gaussrot/eikonal.hpp"
#include "gaussrot/errors.hpp"
#include "gaussrot/gaussian_packet.hpp"
#include "gaussrot/grid.hpp"
#include "gaussrot/potential.hpp"
#include "gaussrot/quadrature.hpp"
#include "gaussrot/ridge.hpp"
#include "gaussrot/tensor.hpp"
#include "gaussrot/units.hpp"
