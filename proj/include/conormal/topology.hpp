#pragma once

// Product presentations of closed manifolds.  The geometry builders attach
// one of these to every manifold so the algebra module can read off Betti
// tables without triangulating anything.

#include <string>
#include <vector>

namespace conormal {

struct Factor {
    enum class Kind { Point, Sphere, Torus };
    Kind kind = Kind::Point;
    int dim = 0;

    static Factor point() { return {Kind::Point, 0}; }
    static Factor sphere(int m) { return {Kind::Sphere, m}; }
    static Factor circle() { return {Kind::Sphere, 1}; }
    static Factor torus(int m) { return {Kind::Torus, m}; }

    std::string label() const;
    bool operator==(const Factor&) const = default;
};

// A connected product of primitive factors.
struct ProductTopology {
    std::vector<Factor> factors;

    int dim() const;
    std::string label() const;
    bool operator==(const ProductTopology&) const = default;
};

// A disjoint union of products.
struct Topology {
    std::vector<ProductTopology> components;

    int dim() const;
    std::string label() const;
    bool connected() const { return components.size() == 1; }
    bool operator==(const Topology&) const = default;

    static Topology single(std::vector<Factor> factors) {
        return Topology{{ProductTopology{std::move(factors)}}};
    }
};

}  // namespace conormal
