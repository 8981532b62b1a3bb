#include "noise.hpp"

#include <cmath>
#include <vector>

namespace etdpc::augment {

using corpus::Raster;

void NoiseParams::validate() const {
    if (gaussian_sigma_min < 0.0 || gaussian_sigma_max < gaussian_sigma_min)
        throw ConfigError("gaussian noise sigma range must satisfy 0 <= min <= max");
    if (salt_pepper_p < 0.0 || salt_pepper_p > 1.0)
        throw ConfigError("salt-pepper probability must lie in [0,1]");
    if (blur_sigma < 0.0) throw ConfigError("blur sigma must be >= 0");
    if (contrast_alpha <= 0.0) throw ConfigError("contrast alpha must be > 0");
}

namespace {

uint8_t clamp8(double v) {
    if (v <= 0.0) return 0;
    if (v >= 255.0) return 255;
    return static_cast<uint8_t>(std::lround(v));
}

int32_t reflect(int32_t i, int32_t n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - i - 1;
    }
    return i;
}

}  // namespace

Raster additive_gaussian_noise(const Raster& in, const NoiseParams& p, Rng& rng) {
    p.validate();
    const double sigma = rng.uniform(p.gaussian_sigma_min, p.gaussian_sigma_max);
    if (sigma == 0.0) return in;
    Raster out(in.height, in.width, 0);
    for (size_t i = 0; i < in.px.size(); ++i)
        out.px[i] = clamp8(static_cast<double>(in.px[i]) + rng.gaussian(0.0, sigma));
    return out;
}

Raster salt_and_pepper(const Raster& in, const NoiseParams& p, Rng& rng) {
    p.validate();
    Raster out = in;
    if (p.salt_pepper_p == 0.0) return out;
    for (size_t i = 0; i < out.px.size(); ++i) {
        if (rng.uniform() < p.salt_pepper_p) out.px[i] = rng.uniform() < 0.5 ? 0 : 255;
    }
    return out;
}

Raster gaussian_blur(const Raster& in, const NoiseParams& p) {
    p.validate();
    if (p.blur_sigma == 0.0) return in;
    const int32_t radius = static_cast<int32_t>(std::ceil(3.0 * p.blur_sigma));
    std::vector<double> kernel(static_cast<size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int32_t i = -radius; i <= radius; ++i)
        sum += kernel[static_cast<size_t>(i + radius)] =
            std::exp(-0.5 * (static_cast<double>(i) * i) / (p.blur_sigma * p.blur_sigma));
    for (double& k : kernel) k /= sum;

    // Separable passes with a double intermediate; rounding happens once.
    std::vector<double> tmp(in.px.size());
    for (int32_t y = 0; y < in.height; ++y)
        for (int32_t x = 0; x < in.width; ++x) {
            double acc = 0.0;
            for (int32_t k = -radius; k <= radius; ++k)
                acc += kernel[static_cast<size_t>(k + radius)] *
                       in.at(y, reflect(x + k, in.width));
            tmp[static_cast<size_t>(y) * in.width + x] = acc;
        }
    Raster out(in.height, in.width, 0);
    for (int32_t y = 0; y < in.height; ++y)
        for (int32_t x = 0; x < in.width; ++x) {
            double acc = 0.0;
            for (int32_t k = -radius; k <= radius; ++k)
                acc += kernel[static_cast<size_t>(k + radius)] *
                       tmp[static_cast<size_t>(reflect(y + k, in.height)) * in.width + x];
            out.at(y, x) = clamp8(acc);
        }
    return out;
}

Raster linear_contrast(const Raster& in, const NoiseParams& p) {
    p.validate();
    Raster out(in.height, in.width, 0);
    for (size_t i = 0; i < in.px.size(); ++i)
        out.px[i] = clamp8(127.0 + p.contrast_alpha * (static_cast<double>(in.px[i]) - 127.0));
    return out;
}

Raster apply_noise_pipeline(const Raster& in, const NoiseParams& p, Rng& rng) {
    Raster img = additive_gaussian_noise(in, p, rng);
    img = salt_and_pepper(img, p, rng);
    img = gaussian_blur(img, p);
    return linear_contrast(img, p);
}

}  // namespace etdpc::augment
