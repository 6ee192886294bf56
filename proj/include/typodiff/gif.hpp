#pragma once

#include <string>

namespace td::typogen {

// Animated GIF89a export (216-color cube, infinite loop). frames is
// T*H*W*3 floats in [0,1]; delay is per frame in hundredths of a second.
void write_gif(const std::string& path, const float* frames, int T, int H, int W,
               int delay_cs = 12);

}  // namespace td::typogen
