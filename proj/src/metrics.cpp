#include "radiant/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace radiant {

Region mask_bbox(const ImageGray& mask, int pad) {
  int x0 = mask.width, y0 = mask.height, x1 = 0, y1 = 0;
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x)
      if (mask.at(y, x) > 0.5f) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x + 1);
        y1 = std::max(y1, y + 1);
      }
  if (x1 <= x0) return {0, 0, mask.width, mask.height};  // empty mask: whole image
  return {std::max(0, x0 - pad), std::max(0, y0 - pad), std::min(mask.width, x1 + pad),
          std::min(mask.height, y1 + pad)};
}

double psnr(const ImageRGB& pred, const ImageRGB& gt, const Region& region) {
  if (pred.width != gt.width || pred.height != gt.height)
    throw std::invalid_argument("psnr: image shapes differ");
  if (region.empty()) throw std::invalid_argument("psnr: empty region");
  double se = 0;
  for (int y = region.y0; y < region.y1; ++y)
    for (int x = region.x0; x < region.x1; ++x)
      for (int c = 0; c < 3; ++c) {
        double d = double(pred.at(y, x, c)) - double(gt.at(y, x, c));
        se += d * d;
      }
  double mse = se / (3.0 * region.width() * region.height());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const ImageRGB& pred, const ImageRGB& gt, const Region& region) {
  if (pred.width != gt.width || pred.height != gt.height)
    throw std::invalid_argument("ssim: image shapes differ");
  constexpr int kWin = 11;
  if (region.width() < kWin || region.height() < kWin)
    throw std::invalid_argument("ssim: region smaller than the 11x11 window");
  constexpr double kC1 = 0.01 * 0.01, kC2 = 0.03 * 0.03, kSigma = 1.5;

  double kernel[kWin];
  double ksum = 0;
  for (int i = 0; i < kWin; ++i) {
    double d = i - kWin / 2;
    kernel[i] = std::exp(-d * d / (2 * kSigma * kSigma));
    ksum += kernel[i];
  }
  for (int i = 0; i < kWin; ++i) kernel[i] /= ksum;

  double total = 0;
  for (int c = 0; c < 3; ++c) {
    double acc = 0;
    long count = 0;
    for (int y = region.y0; y + kWin <= region.y1; ++y)
      for (int x = region.x0; x + kWin <= region.x1; ++x) {
        double mu_p = 0, mu_g = 0, pp = 0, gg = 0, pg = 0;
        for (int i = 0; i < kWin; ++i)
          for (int j = 0; j < kWin; ++j) {
            double w = kernel[i] * kernel[j];
            double p = pred.at(y + i, x + j, c);
            double g = gt.at(y + i, x + j, c);
            mu_p += w * p;
            mu_g += w * g;
            pp += w * p * p;
            gg += w * g * g;
            pg += w * p * g;
          }
        double var_p = pp - mu_p * mu_p;
        double var_g = gg - mu_g * mu_g;
        double cov = pg - mu_p * mu_g;
        double s = ((2 * mu_p * mu_g + kC1) * (2 * cov + kC2)) /
                   ((mu_p * mu_p + mu_g * mu_g + kC1) * (var_p + var_g + kC2));
        acc += s;
        ++count;
      }
    total += acc / double(count);
  }
  return total / 3.0;
}

}  // namespace radiant
