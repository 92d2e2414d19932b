#include "tdsa/image.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace tdsa {

void write_pgm(const std::string& path, long w, long h,
               const std::vector<double>& values) {
  if (static_cast<long>(values.size()) != w * h)
    throw std::invalid_argument("write_pgm: size mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_pgm: cannot open " + path);
  out << "P5\n" << w << " " << h << "\n255\n";
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  const double span = hi > lo ? hi - lo : 1.0;
  for (double v : values) {
    const double t = (v - lo) / span;
    const unsigned char b =
        static_cast<unsigned char>(std::clamp(t * 255.0 + 0.5, 0.0, 255.0));
    out.write(reinterpret_cast<const char*>(&b), 1);
  }
}

void write_label_ppm(const std::string& path, long w, long h,
                     const std::vector<int>& labels) {
  if (static_cast<long>(labels.size()) != w * h)
    throw std::invalid_argument("write_label_ppm: size mismatch");
  static const unsigned char palette[16][3] = {
      {0, 0, 0},       {230, 25, 75},   {60, 180, 75},   {255, 225, 25},
      {0, 130, 200},   {245, 130, 48},  {145, 30, 180},  {70, 240, 240},
      {240, 50, 230},  {210, 245, 60},  {250, 190, 212}, {0, 128, 128},
      {220, 190, 255}, {170, 110, 40},  {128, 128, 0},   {128, 128, 128}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_label_ppm: cannot open " + path);
  out << "P6\n" << w << " " << h << "\n255\n";
  for (int l : labels) {
    const unsigned char* c = palette[static_cast<unsigned>(l) % 16];
    out.write(reinterpret_cast<const char*>(c), 3);
  }
}

}  // namespace tdsa
