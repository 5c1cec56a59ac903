#pragma once

#include "nhep/core.hpp"
#include "nhep/dilation.hpp"
#include "nhep/dynamics.hpp"
#include "nhep/ep_analysis.hpp"
#include "nhep/error.hpp"
#include "nhep/io.hpp"
#include "nhep/nv_levels.hpp"
#include "nhep/polynomial.hpp"
#include "nhep/readout.hpp"
#include "nhep/retrieval.hpp"
