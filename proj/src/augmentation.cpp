#include "pssl/augmentation.hpp"

#include <algorithm>
#include <cmath>

namespace pssl::augment {

void AugmentationPolicy::validate() const {
  check_arg(vec.noise_sigma >= 0.0, "noise_sigma must be non-negative");
  check_arg(vec.mask_prob >= 0.0 && vec.mask_prob <= 1.0, "mask_prob must be in [0, 1]");
  check_arg(vec.scale_lo > 0.0 && vec.scale_lo <= vec.scale_hi, "scale range must be ordered and positive");
  check_arg(img.crop_lo > 0.0 && img.crop_lo <= img.crop_hi && img.crop_hi <= 1.0,
            "crop range must be ordered within (0, 1]");
  check_arg(img.flip_prob >= 0.0 && img.flip_prob <= 1.0, "flip_prob must be in [0, 1]");
  check_arg(img.jitter_strength >= 0.0 && img.jitter_strength < 1.0,
            "jitter_strength must be in [0, 1)");
  check_arg(img.grayscale_prob >= 0.0 && img.grayscale_prob <= 1.0,
            "grayscale_prob must be in [0, 1]");
  check_arg(img.blur_lo >= 0.0 && img.blur_lo <= img.blur_hi, "blur range must be ordered");
}

Vector augment_once(const Vector& sample, const VectorPolicy& policy, RngStream& stream) {
  const double scale = stream.uniform(policy.scale_lo, policy.scale_hi);
  Vector view = sample * scale;
  for (Eigen::Index i = 0; i < view.size(); ++i)
    view(i) += policy.noise_sigma * stream.normal();
  for (Eigen::Index i = 0; i < view.size(); ++i)
    if (stream.uniform() < policy.mask_prob) view(i) = 0.0;
  return view;
}

std::pair<Vector, Vector> make_views(const Vector& sample, const VectorPolicy& policy,
                                     RngStream& stream) {
  Vector v1 = augment_once(sample, policy, stream);
  Vector v2 = augment_once(sample, policy, stream);
  return {std::move(v1), std::move(v2)};
}

namespace {

double bilinear(const Image& img, double y, double x, int c) {
  const int y0 = std::clamp(static_cast<int>(std::floor(y)), 0, img.height - 1);
  const int x0 = std::clamp(static_cast<int>(std::floor(x)), 0, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const int x1 = std::min(x0 + 1, img.width - 1);
  const double fy = std::clamp(y - y0, 0.0, 1.0);
  const double fx = std::clamp(x - x0, 0.0, 1.0);
  const double top = img.at(y0, x0, c) * (1.0 - fx) + img.at(y0, x1, c) * fx;
  const double bot = img.at(y1, x0, c) * (1.0 - fx) + img.at(y1, x1, c) * fx;
  return top * (1.0 - fy) + bot * fy;
}

Image crop_resize(const Image& img, int top, int left, int ch, int cw) {
  Image out{img.height, img.width, img.channels, {}};
  out.pixels.assign(img.pixels.size(), 0.0);
  for (int h = 0; h < img.height; ++h) {
    for (int w = 0; w < img.width; ++w) {
      const double sy = top + (ch - 1) * (img.height > 1 ? h / double(img.height - 1) : 0.0);
      const double sx = left + (cw - 1) * (img.width > 1 ? w / double(img.width - 1) : 0.0);
      for (int c = 0; c < img.channels; ++c) out.at(h, w, c) = bilinear(img, sy, sx, c);
    }
  }
  return out;
}

Image gaussian_blur(const Image& img, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    total += kernel[static_cast<std::size_t>(i + radius)];
  }
  for (double& k : kernel) k /= total;
  Image tmp = img, out = img;
  for (int h = 0; h < img.height; ++h)
    for (int w = 0; w < img.width; ++w)
      for (int c = 0; c < img.channels; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i)
          acc += kernel[static_cast<std::size_t>(i + radius)] *
                 img.at(h, std::clamp(w + i, 0, img.width - 1), c);
        tmp.at(h, w, c) = acc;
      }
  for (int h = 0; h < img.height; ++h)
    for (int w = 0; w < img.width; ++w)
      for (int c = 0; c < img.channels; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i)
          acc += kernel[static_cast<std::size_t>(i + radius)] *
                 tmp.at(std::clamp(h + i, 0, img.height - 1), w, c);
        out.at(h, w, c) = acc;
      }
  return out;
}

}  // namespace

Image augment_once(const Image& sample, const ImagePolicy& policy, RngStream& stream) {
  // Fixed draw order: crop area, aspect ratio, crop position (2), flip,
  // brightness, contrast, grayscale, blur sigma.
  const double area = stream.uniform(policy.crop_lo, policy.crop_hi);
  const double ratio = stream.uniform(0.75, 4.0 / 3.0);
  const double u_top = stream.uniform();
  const double u_left = stream.uniform();
  const double u_flip = stream.uniform();
  const double u_bright = stream.uniform();
  const double u_contrast = stream.uniform();
  const double u_gray = stream.uniform();
  const double blur_sigma = stream.uniform(policy.blur_lo, policy.blur_hi);

  int ch = std::clamp(static_cast<int>(std::round(sample.height * std::sqrt(area * ratio))), 1,
                      sample.height);
  int cw = std::clamp(static_cast<int>(std::round(sample.width * std::sqrt(area / ratio))), 1,
                      sample.width);
  const int top = static_cast<int>(u_top * (sample.height - ch + 1));
  const int left = static_cast<int>(u_left * (sample.width - cw + 1));
  Image view = crop_resize(sample, top, left, ch, cw);

  if (u_flip < policy.flip_prob) {
    Image flipped = view;
    for (int h = 0; h < view.height; ++h)
      for (int w = 0; w < view.width; ++w)
        for (int c = 0; c < view.channels; ++c)
          flipped.at(h, w, c) = view.at(h, view.width - 1 - w, c);
    view = std::move(flipped);
  }

  const double j = policy.jitter_strength;
  const double brightness = 1.0 - j + 2.0 * j * u_bright;
  const double contrast = 1.0 - j + 2.0 * j * u_contrast;
  double mean = 0.0;
  for (double p : view.pixels) mean += p;
  mean /= static_cast<double>(view.pixels.size());
  for (double& p : view.pixels)
    p = std::clamp((p * brightness - mean) * contrast + mean, 0.0, 1.0);

  if (view.channels > 1 && u_gray < policy.grayscale_prob) {
    for (int h = 0; h < view.height; ++h)
      for (int w = 0; w < view.width; ++w) {
        double lum = 0.0;
        for (int c = 0; c < view.channels; ++c) lum += view.at(h, w, c);
        lum /= view.channels;
        for (int c = 0; c < view.channels; ++c) view.at(h, w, c) = lum;
      }
  }

  if (blur_sigma > 0.0) view = gaussian_blur(view, blur_sigma);
  return view;
}

std::pair<Image, Image> make_views(const Image& sample, const ImagePolicy& policy,
                                   RngStream& stream) {
  Image v1 = augment_once(sample, policy, stream);
  Image v2 = augment_once(sample, policy, stream);
  return {std::move(v1), std::move(v2)};
}

}  // namespace pssl::augment
