#pragma once

#include <string>

#include "forma/tensor.hpp"

namespace forma {

// Images are [3,H,W] doubles in [0,1]; masks are [H,W] with values 0/1.
// On disk masks are bilevel 0/255. Supported containers: PPM/PGM and PNG.

Tensor load_image(const std::string& path);
void save_image(const std::string& path, const Tensor& rgb);  // picks format by extension

Tensor load_mask(const std::string& path);
void save_mask(const std::string& path, const Tensor& mask);

// Probability maps round-trip through 16-bit PGM.
void save_prob_map(const std::string& path, const Tensor& prob);
Tensor load_prob_map(const std::string& path);

}  // namespace forma
