#pragma once

// Umbrella header.

#include "loopverify/belief.hpp"
#include "loopverify/controller.hpp"
#include "loopverify/domain_io.hpp"
#include "loopverify/enumerate.hpp"
#include "loopverify/error.hpp"
#include "loopverify/exec_epistemic.hpp"
#include "loopverify/exec_exact.hpp"
#include "loopverify/montecarlo.hpp"
#include "loopverify/synth.hpp"
#include "loopverify/theory.hpp"
