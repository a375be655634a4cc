#pragma once

// Umbrella header for the whole library.

#include "spillover/common.hpp"
#include "spillover/config.hpp"
#include "spillover/connectedness.hpp"
#include "spillover/diagnostics.hpp"
#include "spillover/hedging.hpp"
#include "spillover/linalg.hpp"
#include "spillover/mackinnon.hpp"
#include "spillover/network.hpp"
#include "spillover/panel.hpp"
#include "spillover/qvar.hpp"
#include "spillover/report.hpp"
#include "spillover/synthlab.hpp"
#include "spillover/tvp_var.hpp"
#include "spillover/var.hpp"
