#pragma once

// Umbrella header for the memloop library.

#include "memloop/analysis.hpp"
#include "memloop/io.hpp"
#include "memloop/models.hpp"
#include "memloop/presets.hpp"
#include "memloop/simulate.hpp"
#include "memloop/waveform.hpp"
