#include "neuroflag/dataset/csv_export.hpp"

#include <filesystem>
#include <fstream>

#include <fmt/format.h>

#include "neuroflag/error.hpp"

namespace neuroflag::dataset {

std::size_t export_frames_csv(const FrameSequence& frames, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const auto path = (std::filesystem::path(dir) / fmt::format("frame_{:06d}.csv", k)).string();
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "i,j,x,y,z\n";
    const auto f = frames.frame(k);
    for (std::size_t t = 0; t < frames.rows * frames.cols; ++t) {
      const auto g = grid_index(t, frames.cols);
      out << fmt::format("{},{},{:.6f},{:.6f},{:.6f}\n", g.row, g.col, f[t * 3], f[t * 3 + 1], f[t * 3 + 2]);
    }
    if (!out) throw IoError("failed writing " + path);
  }
  return frames.size();
}

}  // namespace neuroflag::dataset
