#pragma once

#include "nlacoustic/core.hpp"
#include "nlacoustic/data_pipeline.hpp"
#include "nlacoustic/error.hpp"
#include "nlacoustic/experiment.hpp"
#include "nlacoustic/forward_solver.hpp"
#include "nlacoustic/io.hpp"
#include "nlacoustic/linearized_solver.hpp"
#include "nlacoustic/nonlinearity.hpp"
#include "nlacoustic/observation.hpp"
#include "nlacoustic/qp.hpp"
#include "nlacoustic/reconstruction.hpp"
