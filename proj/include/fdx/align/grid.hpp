#pragma once

#include "fdx/core/timeline.hpp"

#include <string>

namespace fdx::align {

// Fixed-width text grid, one row per channel and one column per frame.
// WAIT renders as '·', SIL as '_', PAD as '~', EPAD as '^'.
std::string render_grid(const Timeline& t);

} // namespace fdx::align
