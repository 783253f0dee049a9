#pragma once

// Template definitions for geometry.hpp.

#include <stdexcept>

namespace conormal::geometry {

template <class Derived>
LocalJet MapChart<Derived>::jet(const Vec& u, int order) const {
    const int m = dim();
    if (m > kMaxJetVars) throw std::invalid_argument("chart dimension exceeds jet capacity");
    const int ord = order < 1 ? 1 : order;
    std::vector<Jet> in(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) in[static_cast<std::size_t>(i)] = Jet::variable(u[i], i, m, ord);
    std::vector<Jet> out(static_cast<std::size_t>(ambientDim()));
    static_cast<const Derived&>(*this).template map<Jet>(in.data(), out.data());
    return unpackJets(out, m, order);
}

}  // namespace conormal::geometry
