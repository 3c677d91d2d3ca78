#pragma once

// Image quality metrics over a rectangular evaluation region.

#include "radiant/image.hpp"

#include <limits>

namespace radiant {

struct Region {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open [x0,x1) x [y0,y1)
  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool empty() const { return width() <= 0 || height() <= 0; }
};

inline Region full_region(const ImageRGB& img) { return {0, 0, img.width, img.height}; }

// Foreground bounding box of a mask, padded and clipped to the image.
Region mask_bbox(const ImageGray& mask, int pad);

// 10*log10(1/MSE) for values in [0,1]; identical images return +infinity.
double psnr(const ImageRGB& pred, const ImageRGB& gt, const Region& region);

// Mean local SSIM, 11x11 Gaussian window (sigma 1.5), C1=0.01^2, C2=0.03^2,
// averaged over channels. Windows must fit inside the region.
double ssim(const ImageRGB& pred, const ImageRGB& gt, const Region& region);

}  // namespace radiant
