#pragma once

#include <optional>
#include <string_view>

#include "memloop/waveform.hpp"

namespace memloop {

/// Published measurement protocols usable as CLI presets.
///
///   peo-pani: x=12, dt=20 s, dv=0.1 V, v_max=0.9 V, no pad  (N=432)
///   tio2:     x=10, dt=0.01 s, dv=0.0375 V, v_max=1.5 V, 0.6 s pad  (N=1600)
inline std::optional<WaveformSpec> preset_waveform(std::string_view name) {
    if (name == "peo-pani") return make_staircase_spec(12, 20.0, 0.1, 0.9, 0.0);
    if (name == "tio2") return make_staircase_spec(10, 0.01, 0.0375, 1.5, 0.6);
    return std::nullopt;
}

}  // namespace memloop
