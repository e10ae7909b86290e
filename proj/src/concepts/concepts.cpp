#include "reasonbreak/concepts/concepts.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace reasonbreak {

std::string to_string(ConceptLevel level) {
    switch (level) {
        case ConceptLevel::Continental: return "continental";
        case ConceptLevel::National: return "national";
        case ConceptLevel::City: return "city";
        case ConceptLevel::Local: return "local";
    }
    return "local";
}

ConceptLevel concept_level_from_string(const std::string& s) {
    if (s == "continental") return ConceptLevel::Continental;
    if (s == "national") return ConceptLevel::National;
    if (s == "city") return ConceptLevel::City;
    if (s == "local") return ConceptLevel::Local;
    throw std::invalid_argument("unknown concept level: " + s);
}

PixelRect bbox_to_pixels(const BBox& bbox, int width, int height) {
    if (width < 1 || height < 1) throw std::invalid_argument("bbox_to_pixels: invalid dims");
    PixelRect r;
    r.x0 = std::clamp((bbox.center_x - bbox.size / 2.0) * width, 0.0, static_cast<double>(width));
    r.x1 = std::clamp((bbox.center_x + bbox.size / 2.0) * width, 0.0, static_cast<double>(width));
    r.y0 = std::clamp((bbox.center_y - bbox.size / 2.0) * height, 0.0, static_cast<double>(height));
    r.y1 = std::clamp((bbox.center_y + bbox.size / 2.0) * height, 0.0, static_cast<double>(height));
    r.degenerate = !(r.x1 > r.x0 && r.y1 > r.y0);
    return r;
}

BlockConceptMap assign_concepts(const GridSpec& grid, int source_width, int source_height,
                                const std::vector<ConceptAnnotation>& annotations,
                                double confidence_floor) {
    if (grid.m < 1 || grid.n < 1 || source_width < 1 || source_height < 1)
        throw std::invalid_argument("assign_concepts: invalid grid or dims");

    std::vector<int> kept;
    std::vector<PixelRect> rects;
    for (size_t i = 0; i < annotations.size(); ++i) {
        if (annotations[i].confidence < confidence_floor) continue;
        kept.push_back(static_cast<int>(i));
        rects.push_back(bbox_to_pixels(annotations[i].bbox, source_width, source_height));
    }

    const int total = grid.m * grid.n;
    BlockConceptMap map;
    map.concept_indices.assign(total, {});
    map.fallback.assign(total, false);

    for (int row = 0; row < grid.n; ++row) {
        for (int col = 0; col < grid.m; ++col) {
            // Block extent back-projected to original coordinates.
            double bx0 = static_cast<double>(col) * source_width / grid.m;
            double bx1 = static_cast<double>(col + 1) * source_width / grid.m;
            double by0 = static_cast<double>(row) * source_height / grid.n;
            double by1 = static_cast<double>(row + 1) * source_height / grid.n;

            auto& set = map.concept_indices[static_cast<size_t>(row) * grid.m + col];
            for (size_t j = 0; j < kept.size(); ++j) {
                const PixelRect& r = rects[j];
                if (r.degenerate) continue;
                double ix = std::min(bx1, r.x1) - std::max(bx0, r.x0);
                double iy = std::min(by1, r.y1) - std::max(by0, r.y0);
                if (ix > 0.0 && iy > 0.0) set.push_back(kept[j]);
            }
            if (set.empty() && !kept.empty()) {
                set = kept;
                map.fallback[static_cast<size_t>(row) * grid.m + col] = true;
            }
        }
    }
    return map;
}

std::vector<ConceptAnnotation> parse_annotations_json(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    if (!j.contains("concepts") || !j["concepts"].is_array())
        throw std::invalid_argument("annotation JSON missing 'concepts' array");
    std::vector<ConceptAnnotation> out;
    for (const auto& e : j["concepts"]) {
        ConceptAnnotation a;
        a.phrase = e.at("phrase").get<std::string>();
        a.level = concept_level_from_string(e.at("level").get<std::string>());
        const auto& b = e.at("bbox");
        if (!b.is_array() || b.size() != 3)
            throw std::invalid_argument("bbox must be [center_x, center_y, size]");
        a.bbox = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>()};
        a.confidence = e.at("confidence").get<double>();
        out.push_back(std::move(a));
    }
    return out;
}

std::string annotations_to_json(const std::vector<ConceptAnnotation>& annotations) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& a : annotations) {
        arr.push_back({{"phrase", a.phrase},
                       {"level", to_string(a.level)},
                       {"bbox", {a.bbox.center_x, a.bbox.center_y, a.bbox.size}},
                       {"confidence", a.confidence}});
    }
    return nlohmann::json{{"concepts", arr}}.dump(2);
}

std::vector<ConceptAnnotation> load_annotations(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open annotation file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_annotations_json(text);
}

void save_annotations(const std::vector<ConceptAnnotation>& annotations, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write annotation file: " + path);
    out << annotations_to_json(annotations) << "\n";
}

}  // namespace reasonbreak
