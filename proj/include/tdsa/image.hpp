#pragma once

#include <string>
#include <vector>

namespace tdsa {

// Grayscale P5 portable graymap; values are min-max normalized so the
// largest input maps to the brightest pixel.
void write_pgm(const std::string& path, long w, long h,
               const std::vector<double>& values);

// Indexed-color P6 portable pixmap from integer labels (fixed palette,
// label 0 = black).
void write_label_ppm(const std::string& path, long w, long h,
                     const std::vector<int>& labels);

}  // namespace tdsa
