#pragma once

#include <cstdint>

#include "image.hpp"
#include "rng.hpp"

namespace etdpc::augment {

// Scan-noise settings. gaussian sigma is drawn once per image from
// [sigma_min, sigma_max]; salt-pepper replaces each pixel independently with
// probability p by 0 or 255 on a fair coin; blur is a discrete Gaussian of
// std sigma with radius ceil(3*sigma), normalized, reflective border;
// contrast maps v -> 127 + alpha*(v-127). All transforms clamp to 8-bit.
struct NoiseParams {
    double gaussian_sigma_min = 0.0;
    double gaussian_sigma_max = 12.75;  // 5% of full intensity scale
    double salt_pepper_p = 0.9;
    double blur_sigma = 0.5;
    double contrast_alpha = 1.0;
    uint64_t seed = 0;

    void validate() const;
};

corpus::Raster additive_gaussian_noise(const corpus::Raster& in, const NoiseParams& p, Rng& rng);
corpus::Raster salt_and_pepper(const corpus::Raster& in, const NoiseParams& p, Rng& rng);
corpus::Raster gaussian_blur(const corpus::Raster& in, const NoiseParams& p);
corpus::Raster linear_contrast(const corpus::Raster& in, const NoiseParams& p);

// The fixed pipeline order: gaussian -> salt-pepper -> blur -> contrast.
corpus::Raster apply_noise_pipeline(const corpus::Raster& in, const NoiseParams& p, Rng& rng);

}  // namespace etdpc::augment
