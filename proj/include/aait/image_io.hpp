#ifndef AAIT_IMAGE_IO_HPP
#define AAIT_IMAGE_IO_HPP

#include <string>
#include <vector>

#include "aait/tensor.hpp"

namespace aait {

// 8-bit RGB PNG. Values are rounded to the 255 grid on write.
Tensor read_png(const std::string& path);  // -> (1,3,H,W) in [0,1]
void write_png(const std::string& path, const Tensor& image);  // (1,3,H,W)

Tensor quantize_8bit(const Tensor& t);

// Minimal bar chart renderer for report plots.
struct BarChart {
  std::string title;
  std::vector<std::string> labels;
  std::vector<float> values;
};

void write_bar_chart(const std::string& path, const BarChart& chart, int width = 640,
                     int height = 400);

}  // namespace aait

#endif
