#pragma once

#include "penning/analysis.hpp"
#include "penning/axial.hpp"
#include "penning/config.hpp"
#include "penning/couplings.hpp"
#include "penning/crystal.hpp"
#include "penning/io.hpp"
#include "penning/pipeline.hpp"
#include "penning/planar.hpp"
#include "penning/units.hpp"
