#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pssl/augmentation.hpp"
#include "pssl/matrix.hpp"

namespace pssl::data {

// Features feed training; labels exist only for evaluation and purity
// diagnostics and never reach a training operation.
struct Dataset {
  Matrix features;          // N x d in vector mode; N x (H*W*C) scaled pixels in image mode
  bool image_mode = false;
  int height = 0, width = 0, channels = 0;
  std::vector<int> labels;  // empty when unlabeled
  int class_count = 0;      // 0 when unknown

  int size() const { return static_cast<int>(features.rows()); }
  int feature_dim() const { return static_cast<int>(features.cols()); }
  bool labeled() const { return !labels.empty(); }
  augment::Image image(int row) const;
  void validate() const;
};

// CSV with feature columns f0..f{d-1} and an optional trailing label column.
// Leading '#' lines are provenance comments and are skipped.
Dataset load_csv(const std::string& path);

// IDX-style binary: magic (0, 0, 0x08, ndims), big-endian u32 dimensions,
// then unsigned bytes. ndims 3 (N,H,W) or 4 (N,H,W,C) for features; an
// optional 1-dim IDX file provides labels.
Dataset load_idx(const std::string& features_path, const std::string& labels_path = "");

// K isotropic Gaussian blobs: centers drawn as separation * g/|g| with
// g ~ N(0, I), so every center sits at radius `separation`; points at
// center + sigma * N(0, I). Labels are blob ids.
Dataset make_blobs(int n, int d, int k, double separation, double sigma, std::uint64_t seed);

void write_csv(const Dataset& dataset, const std::string& path,
               const std::string& provenance);

}  // namespace pssl::data
