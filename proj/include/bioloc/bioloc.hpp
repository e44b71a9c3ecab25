#pragma once

#include "errors.hpp"
#include "geometry.hpp"
#include "grid_map.hpp"
#include "pose_cells.hpp"
#include "observation.hpp"
#include "local_view.hpp"
#include "localizer.hpp"
#include "mcl.hpp"
#include "simulator.hpp"
#include "harness.hpp"
