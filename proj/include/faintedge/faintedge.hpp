#pragma once

#include "faintedge/beam_tree.hpp"
#include "faintedge/bench.hpp"
#include "faintedge/edges.hpp"
#include "faintedge/empirical.hpp"
#include "faintedge/error.hpp"
#include "faintedge/fiber.hpp"
#include "faintedge/image.hpp"
#include "faintedge/image_io.hpp"
#include "faintedge/line_pyramid.hpp"
#include "faintedge/parallel.hpp"
#include "faintedge/params.hpp"
#include "faintedge/pattern.hpp"
#include "faintedge/suppression.hpp"
#include "faintedge/thresholds.hpp"
