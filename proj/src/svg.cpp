#include <algorithm>
#include <cmath>
#include <sstream>

#include "conormal/cli.hpp"

namespace conormal::cli {

namespace {

constexpr double kSize = 480.0;
constexpr double kPad = 24.0;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

struct Frame2 {
    double x0, y0, scale;
    double x(double v) const { return kPad + (v - x0) * scale; }
    double y(double v) const { return kSize - kPad - (v - y0) * scale; }
};

std::string open(const char* title) {
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize << "\" height=\"" << kSize
      << "\" viewBox=\"0 0 " << kSize << ' ' << kSize << "\">\n<title>" << title << "</title>\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    return o.str();
}

}  // namespace

std::string chordDiagramSvg(const geometry::ChartedManifold& k, const chords::ChordSet& s) {
    // Polyline per component from its first chart, which covers the curve.
    std::vector<std::vector<std::pair<double, double>>> lines;
    double lo[2] = {1e300, 1e300}, hi[2] = {-1e300, -1e300};
    for (int comp = 0; comp < k.components(); ++comp) {
        const auto& c = k.chart(comp, 0);
        const auto& dom = c.domain();
        std::vector<std::pair<double, double>> pts;
        const int N = 400;
        for (int i = 0; i <= N; ++i) {
            geometry::Vec u(1);
            u[0] = dom.lo[0] + (dom.hi[0] - dom.lo[0]) * i / N;
            const geometry::Vec q = c.point(u);
            pts.emplace_back(q[0], q[1]);
            for (int a = 0; a < 2; ++a) {
                lo[a] = std::min(lo[a], q[a]);
                hi[a] = std::max(hi[a], q[a]);
            }
        }
        lines.push_back(std::move(pts));
    }
    const double span = std::max({hi[0] - lo[0], hi[1] - lo[1], 1e-9});
    const Frame2 f{lo[0], lo[1], (kSize - 2 * kPad) / span};

    std::ostringstream o;
    o.precision(6);
    o << open(("binormal chords of " + k.name()).c_str());
    for (std::size_t i = 0; i < lines.size(); ++i) {
        o << "<polyline fill=\"none\" stroke=\"" << kPalette[i % 4] << "\" stroke-width=\"2\" points=\"";
        for (const auto& [x, y] : lines[i]) o << f.x(x) << ',' << f.y(y) << ' ';
        o << "\"/>\n";
    }
    for (const auto& ch : s.chords) {
        if (ch.swapId >= 0 && ch.swapId < ch.id) continue;  // one line per unordered chord
        o << "<line x1=\"" << f.x(ch.q[0]) << "\" y1=\"" << f.y(ch.q[1]) << "\" x2=\"" << f.x(ch.qp[0])
          << "\" y2=\"" << f.y(ch.qp[1]) << "\" stroke=\"#555\" stroke-dasharray=\"4 3\">"
          << "<title>chord " << ch.id << " index " << ch.index << "</title></line>\n";
    }
    o << "</svg>\n";
    return o.str();
}

std::string locusSvg(const strops::IntersectionLocus& l) {
    // Horizontal axis: first parameter of P over [0, 2 pi); vertical: tau.
    const double w = kSize - 2 * kPad;
    std::ostringstream o;
    o.precision(6);
    o << open(("intersection locus of " + l.cycle).c_str());
    o << "<rect x=\"" << kPad << "\" y=\"" << kPad << "\" width=\"" << w << "\" height=\"" << w
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (const auto& p : l.points) {
        const double t = p.z.u.size() > 0 ? std::fmod(p.z.u[0] + 4 * M_PI, 2 * M_PI) / (2 * M_PI) : 0.5;
        const double px = kPad + t * w, py = kPad + (1.0 - p.tau) * w;
        o << "<circle cx=\"" << px << "\" cy=\"" << py << "\" r=\"4\" fill=\""
          << kPalette[std::max(0, p.component) % 4] << "\"><title>tau " << p.tau << "</title></circle>\n";
    }
    o << "</svg>\n";
    return o.str();
}

}  // namespace conormal::cli
