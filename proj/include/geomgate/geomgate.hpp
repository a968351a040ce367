#pragma once

#include "qmath.hpp"
#include "device.hpp"
#include "pulse.hpp"
#include "evolve.hpp"
#include "parallel.hpp"
#include "twoqubit.hpp"
#include "tomo.hpp"
#include "rb.hpp"
#include "robustness.hpp"
