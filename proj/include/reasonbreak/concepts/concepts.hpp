#pragma once

#include <string>
#include <vector>

#include "reasonbreak/tiling/tiling.hpp"

namespace reasonbreak {

enum class ConceptLevel { Continental, National, City, Local };

std::string to_string(ConceptLevel level);
ConceptLevel concept_level_from_string(const std::string& s);

/// Normalized square box [center_x, center_y, size]; size is a fraction of
/// each axis independently, so the pixel box is (size*W) x (size*H).
struct BBox {
    double center_x = 0.5;
    double center_y = 0.5;
    double size = 1.0;
};

struct ConceptAnnotation {
    std::string phrase;
    ConceptLevel level = ConceptLevel::Local;
    BBox bbox;
    double confidence = 1.0;
};

struct PixelRect {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open in spirit; clipped to image
    bool degenerate = false;                // zero area after clipping
    double area() const { return (x1 - x0) * (y1 - y0); }
};

struct BlockConceptMap {
    std::vector<std::vector<int>> concept_indices;  // per block, annotation order
    std::vector<bool> fallback;                     // per block
};

PixelRect bbox_to_pixels(const BBox& bbox, int width, int height);

// Block k gets every concept whose pixel rectangle intersects the block's
// back-projected extent with positive area; blocks with no intersection get
// the full concept set and fallback = true. Empty annotation list yields
// empty sets everywhere.
BlockConceptMap assign_concepts(const GridSpec& grid, int source_width, int source_height,
                                const std::vector<ConceptAnnotation>& annotations,
                                double confidence_floor = 0.0);

// Annotation JSON:
// {"concepts": [{"phrase": str, "level": str, "bbox": [cx, cy, size], "confidence": float}]}
std::vector<ConceptAnnotation> parse_annotations_json(const std::string& json_text);
std::string annotations_to_json(const std::vector<ConceptAnnotation>& annotations);
std::vector<ConceptAnnotation> load_annotations(const std::string& path);
void save_annotations(const std::vector<ConceptAnnotation>& annotations, const std::string& path);

}  // namespace reasonbreak
