#pragma once

#include "rmboc/analysis.hpp"
#include "rmboc/campaign.hpp"
#include "rmboc/command.hpp"
#include "rmboc/crosspoint.hpp"
#include "rmboc/engine.hpp"
#include "rmboc/error.hpp"
#include "rmboc/event.hpp"
#include "rmboc/protocol.hpp"
#include "rmboc/routing2d.hpp"
#include "rmboc/scenario.hpp"
#include "rmboc/stats_io.hpp"
#include "rmboc/topology.hpp"
#include "rmboc/workloads.hpp"
