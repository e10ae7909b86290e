#pragma once

#include <cmath>
#include <random>

#include "reasonbreak/concepts/concepts.hpp"
#include "reasonbreak/core/image.hpp"

namespace rbtest {

// Smooth synthetic test image: low-frequency gradients plus sinusoids so
// resampling and encoders see structured content rather than noise.
inline reasonbreak::ImageBuffer synth_image(int h, int w, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double fx = 1.0 + 4.0 * u(rng), fy = 1.0 + 4.0 * u(rng);
    double px = u(rng) * 6.28, py = u(rng) * 6.28;
    reasonbreak::ImageBuffer img(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) {
                double v = 0.5 + 0.2 * std::sin(fx * x / w * 6.28 + px + c) +
                           0.2 * std::cos(fy * y / h * 6.28 + py - c) +
                           0.1 * (static_cast<double>(x) / w - 0.5);
                img.at(y, x, c) = std::min(1.0, std::max(0.0, v));
            }
    return img;
}

// Same content snapped to the 8-bit grid, as a freshly loaded file would be.
inline reasonbreak::ImageBuffer synth_image_u8(int h, int w, uint64_t seed) {
    auto img = synth_image(h, w, seed);
    return reasonbreak::dequantize_u8(reasonbreak::quantize_u8(img), h, w);
}

inline std::vector<reasonbreak::ConceptAnnotation> synth_annotations(uint64_t seed, int count = 3) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const char* phrases[] = {
        "weathered limestone cathedral facade with twin bell towers",
        "dense deciduous broadleaf forest along a river bend",
        "narrow cobblestone street lined with pastel row houses",
        "snow capped granite ridgeline above an alpine meadow",
        "red brick industrial warehouse district near rail yards",
    };
    const reasonbreak::ConceptLevel levels[] = {
        reasonbreak::ConceptLevel::Continental, reasonbreak::ConceptLevel::National,
        reasonbreak::ConceptLevel::City, reasonbreak::ConceptLevel::Local};
    std::vector<reasonbreak::ConceptAnnotation> out;
    for (int i = 0; i < count; ++i) {
        reasonbreak::ConceptAnnotation a;
        a.phrase = phrases[(seed + i) % 5];
        a.level = levels[i % 4];
        a.bbox = {0.2 + 0.6 * u(rng), 0.2 + 0.6 * u(rng), 0.2 + 0.5 * u(rng)};
        a.confidence = 0.3 + 0.7 * u(rng);
        out.push_back(std::move(a));
    }
    return out;
}

}  // namespace rbtest
