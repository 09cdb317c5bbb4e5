#pragma once

#include <utility>
#include <vector>

#include "pssl/matrix.hpp"
#include "pssl/rng.hpp"

namespace pssl::augment {

// Vector-data policy. Per view, in draw order: one scale factor uniform in
// [scale_lo, scale_hi] applied to the whole vector, one Gaussian noise draw
// per coordinate (sigma-scaled), one mask draw per coordinate (zeroing with
// probability mask_prob). Draws are always consumed, so the stream position
// does not depend on the policy values.
struct VectorPolicy {
  double noise_sigma = 0.0;
  double mask_prob = 0.0;
  double scale_lo = 1.0;
  double scale_hi = 1.0;
};

// Image-data policy: random resized crop (aspect-ratio jitter folded into the
// crop), horizontal flip, brightness/contrast jitter, grayscale, Gaussian
// blur. Crops resize back to the input resolution.
struct ImagePolicy {
  double crop_lo = 0.6, crop_hi = 1.0;  // crop area fraction range
  double flip_prob = 0.5;
  double jitter_strength = 0.4;
  double grayscale_prob = 0.2;
  double blur_lo = 0.0, blur_hi = 1.0;  // blur sigma range (pixels)
};

enum class DataKind { Vector, Image };

struct AugmentationPolicy {
  DataKind kind = DataKind::Vector;
  VectorPolicy vec;
  ImagePolicy img;
  void validate() const;
};

struct Image {
  int height = 0, width = 0, channels = 0;
  std::vector<double> pixels;  // [0,1], index (h * width + w) * channels + c

  double at(int h, int w, int c) const {
    return pixels[static_cast<std::size_t>((h * width + w) * channels + c)];
  }
  double& at(int h, int w, int c) {
    return pixels[static_cast<std::size_t>((h * width + w) * channels + c)];
  }
};

// Two independently sampled transformations of the same sample; deterministic
// given the stream.
std::pair<Vector, Vector> make_views(const Vector& sample, const VectorPolicy& policy,
                                     RngStream& stream);
std::pair<Image, Image> make_views(const Image& sample, const ImagePolicy& policy,
                                   RngStream& stream);

Vector augment_once(const Vector& sample, const VectorPolicy& policy, RngStream& stream);
Image augment_once(const Image& sample, const ImagePolicy& policy, RngStream& stream);

}  // namespace pssl::augment
