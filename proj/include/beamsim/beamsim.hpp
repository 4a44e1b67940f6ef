#pragma once

#include "beamsim/autocouple.hpp"
#include "beamsim/config.hpp"
#include "beamsim/control.hpp"
#include "beamsim/detect.hpp"
#include "beamsim/error.hpp"
#include "beamsim/optics.hpp"
#include "beamsim/report.hpp"
#include "beamsim/sim.hpp"
#include "beamsim/turbulence.hpp"
#include "beamsim/verify.hpp"
