#pragma once

#include "cornerbie/cli.hpp"
#include "cornerbie/errors.hpp"
#include "cornerbie/geometry.hpp"
#include "cornerbie/harness.hpp"
#include "cornerbie/kernel.hpp"
#include "cornerbie/mesh.hpp"
#include "cornerbie/operators.hpp"
#include "cornerbie/quadrature.hpp"
