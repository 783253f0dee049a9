#include "conormal/topology.hpp"

#include "conormal/errors.hpp"

namespace conormal {

const char* stageName(Stage s) {
    switch (s) {
        case Stage::Config: return "config";
        case Stage::Geometry: return "geometry";
        case Stage::Chords: return "chords";
        case Stage::MorseFlow: return "morseflow";
        case Stage::Strops: return "strops";
        case Stage::Algebra: return "algebra";
        case Stage::Output: return "output";
    }
    return "unknown";
}

std::string Factor::label() const {
    switch (kind) {
        case Kind::Point: return "pt";
        case Kind::Sphere: return "S" + std::to_string(dim);
        case Kind::Torus: return "T" + std::to_string(dim);
    }
    return "?";
}

int ProductTopology::dim() const {
    int s = 0;
    for (const auto& f : factors) s += f.dim;
    return s;
}

std::string ProductTopology::label() const {
    if (factors.empty()) return "pt";
    std::string s;
    for (std::size_t i = 0; i < factors.size(); ++i) s += (i ? "x" : "") + factors[i].label();
    return s;
}

int Topology::dim() const { return components.empty() ? 0 : components.front().dim(); }

std::string Topology::label() const {
    std::string s;
    for (std::size_t i = 0; i < components.size(); ++i) s += (i ? " + " : "") + components[i].label();
    return s;
}

}  // namespace conormal
