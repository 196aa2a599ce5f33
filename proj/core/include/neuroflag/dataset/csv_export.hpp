#pragma once

#include <cstddef>
#include <string>

#include "neuroflag/dataset/frames.hpp"

namespace neuroflag::dataset {

/// Writes one `frame_NNNNNN.csv` per frame into `dir` (created if missing),
/// rows `i,j,x,y,z` in token order with six decimals. Returns the file count.
std::size_t export_frames_csv(const FrameSequence& frames, const std::string& dir);

}  // namespace neuroflag::dataset
