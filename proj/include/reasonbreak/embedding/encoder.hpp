#pragma once

#include <memory>
#include <string>
#include <vector>

#include "reasonbreak/core/image.hpp"

namespace reasonbreak {

/// Image and text tower sharing one embedding space. Embeddings are
/// unit-normalized; image inputs are resampled to input_side by the encoder.
class Encoder {
public:
    virtual ~Encoder() = default;
    virtual const std::string& name() const = 0;
    virtual int input_side() const = 0;
    virtual int embed_dim() const = 0;
    virtual std::vector<double> encode_image(const ImageBuffer& image) const = 0;
    virtual std::vector<double> encode_text(const std::string& text) const = 0;
};

// Square-block entry point of the image tower (non-square input rejected).
std::vector<double> encode_block(const Encoder& encoder, const ImageBuffer& block);

/// Encoder with a pixel-space adjoint, enough for surrogate ensemble training.
class DifferentiableEncoder : public Encoder {
public:
    // d(embedding)/d(pixels) applied to grad_embedding; `image` must be the
    // input of the matching forward call.
    virtual ImageBuffer encode_image_adjoint(const ImageBuffer& image,
                                             const std::vector<double>& grad_embedding) const = 0;
};

/// Deterministic random linear projection of flattened pixels (image tower)
/// and hashed token counts (text tower). Desk-scale stand-in for a frozen
/// pretrained encoder; every property stays checkable without weights.
class ToyLinearEncoder final : public DifferentiableEncoder {
public:
    ToyLinearEncoder(std::string name, int input_side, int embed_dim, uint64_t seed,
                     int text_bins = 512);

    const std::string& name() const override { return name_; }
    int input_side() const override { return input_side_; }
    int embed_dim() const override { return embed_dim_; }
    std::vector<double> encode_image(const ImageBuffer& image) const override;
    std::vector<double> encode_text(const std::string& text) const override;
    ImageBuffer encode_image_adjoint(const ImageBuffer& image,
                                     const std::vector<double>& grad_embedding) const override;

private:
    std::vector<double> project_pixels(const ImageBuffer& resampled) const;

    std::string name_;
    int input_side_;
    int embed_dim_;
    int text_bins_;
    std::vector<double> image_proj_;  // embed_dim x (3 * side^2)
    std::vector<double> text_proj_;   // embed_dim x text_bins
};

std::shared_ptr<ToyLinearEncoder> make_toy_encoder(const std::string& name, int input_side,
                                                   int embed_dim, uint64_t seed);

}  // namespace reasonbreak
