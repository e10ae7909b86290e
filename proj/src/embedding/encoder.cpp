#include "reasonbreak/embedding/encoder.hpp"

#include <cctype>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "reasonbreak/core/tensor.hpp"

namespace reasonbreak {

std::vector<double> encode_block(const Encoder& encoder, const ImageBuffer& block) {
    if (block.height != block.width)
        throw std::invalid_argument("encode_block: block must be square");
    return encoder.encode_image(block);
}

ToyLinearEncoder::ToyLinearEncoder(std::string name, int input_side, int embed_dim, uint64_t seed,
                                   int text_bins)
    : name_(std::move(name)), input_side_(input_side), embed_dim_(embed_dim), text_bins_(text_bins) {
    if (input_side < 1 || embed_dim < 1 || text_bins < 1)
        throw std::invalid_argument("toy encoder: invalid configuration");
    const size_t pix = static_cast<size_t>(3) * input_side * input_side;
    Rng rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(pix)));
    image_proj_.resize(static_cast<size_t>(embed_dim) * pix);
    for (auto& w : image_proj_) w = dist(rng);
    std::normal_distribution<double> tdist(0.0, 1.0 / std::sqrt(static_cast<double>(text_bins)));
    text_proj_.resize(static_cast<size_t>(embed_dim) * text_bins);
    for (auto& w : text_proj_) w = tdist(rng);
}

std::vector<double> ToyLinearEncoder::project_pixels(const ImageBuffer& resampled) const {
    const size_t pix = static_cast<size_t>(3) * input_side_ * input_side_;
    std::vector<double> z(embed_dim_, 0.0);
#pragma omp parallel for schedule(static)
    for (int d = 0; d < embed_dim_; ++d) {
        const double* row = image_proj_.data() + static_cast<size_t>(d) * pix;
        double s = 0.0;
        for (size_t i = 0; i < pix; ++i) s += row[i] * resampled.data[i];
        z[d] = s;
    }
    return z;
}

std::vector<double> ToyLinearEncoder::encode_image(const ImageBuffer& image) const {
    ImageBuffer r = resample_bilinear(image, input_side_, input_side_);
    std::vector<double> z = project_pixels(r);
    normalize(z);
    return z;
}

std::vector<double> ToyLinearEncoder::encode_text(const std::string& text) const {
    std::vector<double> counts(text_bins_, 0.0);
    std::istringstream iss(text);
    std::string tok;
    while (iss >> tok) {
        std::string lower;
        for (char ch : tok)
            if (std::isalnum(static_cast<unsigned char>(ch)))
                lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        if (lower.empty()) continue;
        counts[std::hash<std::string>{}(lower) % text_bins_] += 1.0;
    }
    std::vector<double> z(embed_dim_, 0.0);
    for (int d = 0; d < embed_dim_; ++d) {
        const double* row = text_proj_.data() + static_cast<size_t>(d) * text_bins_;
        double s = 0.0;
        for (int i = 0; i < text_bins_; ++i) s += row[i] * counts[i];
        z[d] = s;
    }
    normalize(z);
    return z;
}

ImageBuffer ToyLinearEncoder::encode_image_adjoint(const ImageBuffer& image,
                                                   const std::vector<double>& grad_embedding) const {
    if (static_cast<int>(grad_embedding.size()) != embed_dim_)
        throw std::invalid_argument("encode_image_adjoint: gradient dim mismatch");
    ImageBuffer r = resample_bilinear(image, input_side_, input_side_);
    std::vector<double> z = project_pixels(r);
    const double nrm = norm2(z);
    std::vector<double> e(z);
    normalize(e);

    // d(z/|z|) adjoint: (g - (g.e) e) / |z|
    std::vector<double> gz(embed_dim_);
    const double ge = dot(grad_embedding, e);
    for (int d = 0; d < embed_dim_; ++d) gz[d] = (grad_embedding[d] - ge * e[d]) / (nrm > 0 ? nrm : 1.0);

    const size_t pix = static_cast<size_t>(3) * input_side_ * input_side_;
    ImageBuffer grad_resampled(input_side_, input_side_);
    for (int d = 0; d < embed_dim_; ++d) {
        const double* row = image_proj_.data() + static_cast<size_t>(d) * pix;
        for (size_t i = 0; i < pix; ++i) grad_resampled.data[i] += row[i] * gz[d];
    }
    return resample_bilinear_adjoint(grad_resampled, image.height, image.width);
}

std::shared_ptr<ToyLinearEncoder> make_toy_encoder(const std::string& name, int input_side,
                                                   int embed_dim, uint64_t seed) {
    return std::make_shared<ToyLinearEncoder>(name, input_side, embed_dim, seed);
}

}  // namespace reasonbreak
