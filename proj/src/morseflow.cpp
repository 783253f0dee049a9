#include "conormal/morseflow.hpp"

#include <algorithm>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <limits>
#include <random>

#include "conormal/errors.hpp"

namespace conormal::morseflow {

using geometry::LocalJet;

namespace {

// Smooth bump, 1 at the centre and flat to all orders at s = 1.
double bumpProfile(double s) {
    if (s >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - s * s));
}

Mat blockDiag(const Mat& a, const Mat& b) {
    Mat out = Mat::Zero(a.rows() + b.rows(), a.cols() + b.cols());
    out.topLeftCorner(a.rows(), a.cols()) = a;
    out.bottomRightCorner(b.rows(), b.cols()) = b;
    return out;
}

Vec concat(const Vec& a, const Vec& b) {
    Vec out(a.size() + b.size());
    out << a, b;
    return out;
}

}  // namespace

// ------------------------------------------------------------------ metrics

MetricSpec MetricSpec::base(std::string tag) {
    MetricSpec g;
    g.tag_ = std::move(tag);
    return g;
}

MetricSpec MetricSpec::bumped(const ChartedManifold& k, const ChordSet& s, std::string tag, unsigned seed,
                              double amplitude, int count, double radius) {
    MetricSpec g = base(std::move(tag));
    g.seed_ = seed;
    if (amplitude <= 0.0 || count <= 0) return g;
    double maxLen = 0.0;
    for (const auto& c : s.chords) maxLen = std::max(maxLen, c.length);
    if (radius <= 0.0) radius = 0.25 * (maxLen > 0.0 ? maxLen : 1.0);

    const int m = k.intrinsicDim();
    const geometry::SampleCloud cloud(k, m == 1 ? 64 : (m == 2 ? 16 : 6));
    const auto npts = static_cast<long>(cloud.points().size());
    if (npts < 2) throw HypothesisError(Stage::MorseFlow, "too few samples to place metric bumps");
    const int n = k.ambientDim();
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<long> pick(0, npts - 1);
    std::uniform_real_distribution<double> amp(0.5 * amplitude, amplitude);
    std::normal_distribution<double> gauss(0.0, 1.0);
    int attempts = 0;
    while (static_cast<int>(g.bumps_.size()) < count) {
        if (++attempts % 400 == 0) radius *= 0.8;
        if (attempts > 4000) throw HypothesisError(Stage::MorseFlow, "no room for metric bumps away from the chords");
        const long i = pick(rng), j = pick(rng);
        Vec c(2 * n);
        c << cloud.ambient().col(i), cloud.ambient().col(j);
        bool clear = true;
        for (const auto& ch : s.chords) {
            if ((c - concat(ch.q, ch.qp)).norm() < 1.2 * radius) {
                clear = false;
                break;
            }
        }
        if (!clear) continue;
        Vec v(2 * n);
        for (int t = 0; t < 2 * n; ++t) v[t] = gauss(rng);
        g.bumps_.push_back({c, v.normalized(), radius, amp(rng)});
    }
    return g;
}

MetricSpec MetricSpec::jittered(const ChartedManifold& k, const ChordSet& s, unsigned seed, double jitter,
                                int count) const {
    MetricSpec g = *this;
    g.tag_ += "+jitter";
    const MetricSpec extra = bumped(k, s, g.tag_, seed, jitter, count);
    g.bumps_.insert(g.bumps_.end(), extra.bumps_.begin(), extra.bumps_.end());
    return g;
}

Mat MetricSpec::ambientFactor(const Vec& q, const Vec& qp) const {
    const auto n2 = q.size() + qp.size();
    Mat A = Mat::Identity(n2, n2);
    if (bumps_.empty()) return A;
    const Vec y = concat(q, qp);
    for (const auto& b : bumps_) {
        const double phi = bumpProfile((y - b.center).norm() / b.radius);
        if (phi > 0.0) A += b.amplitude * phi * b.direction * b.direction.transpose();
    }
    return A;
}

Mat MetricSpec::chartMetric(const Vec& q, const Vec& qp, const Mat& J, const Mat& Jp) const {
    if (bumps_.empty()) return blockDiag(J.transpose() * J, Jp.transpose() * Jp);
    const Mat B = blockDiag(J, Jp);
    return B.transpose() * ambientFactor(q, qp) * B;
}

double MetricSpec::chordClearance(const ChordSet& s) const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : bumps_)
        for (const auto& c : s.chords) best = std::min(best, (b.center - concat(c.q, c.qp)).norm() - b.radius);
    return best;
}

nlohmann::json MetricSpec::toJson() const {
    nlohmann::json j;
    j["tag"] = tag_;
    j["seed"] = seed_;
    auto arr = nlohmann::json::array();
    for (const auto& b : bumps_) {
        arr.push_back({{"center", std::vector<double>(b.center.data(), b.center.data() + b.center.size())},
                       {"direction", std::vector<double>(b.direction.data(), b.direction.data() + b.direction.size())},
                       {"radius", b.radius},
                       {"amplitude", b.amplitude}});
    }
    j["bumps"] = arr;
    return j;
}

// --------------------------------------------------------------- gradients

namespace {

// V in chart coordinates from order-1 jets; no domain checks, so flow stages
// may step slightly past a chart boundary before the switch.
Vec chartField(const ChartedManifold& k, const MetricSpec& g, const PairPoint& y, int direction) {
    const LocalJet a = k.chart(y.p).jet(y.p.u, 1), b = k.chart(y.pp).jet(y.pp.u, 1);
    const Vec r = a.q - b.q;
    const auto m = a.J.cols(), mp = b.J.cols();
    Vec grad(m + mp);
    grad.head(m) = a.J.transpose() * r;
    grad.tail(mp) = -b.J.transpose() * r;
    const Mat G = g.chartMetric(a.q, b.q, a.J, b.J);
    Eigen::LDLT<Mat> ldlt(G);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        throw NumericalError(Stage::MorseFlow, "metric solve failed");
    return -static_cast<double>(direction) * ldlt.solve(grad);
}

}  // namespace

Vec negGradient(const ChartedManifold& k, const MetricSpec& g, const PairPoint& y) {
    return chartField(k, g, y, 1);
}

Vec negGradientAmbient(const ChartedManifold& k, const MetricSpec& g, const PairPoint& y) {
    const Vec v = negGradient(k, g, y);
    const LocalJet a = k.eval(y.p, 1), b = k.eval(y.pp, 1);
    const auto m = a.J.cols();
    return concat(a.J * v.head(m), b.J * v.tail(v.size() - m));
}

double pairEnergy(const ChartedManifold& k, const PairPoint& y) {
    return 0.5 * (k.chart(y.p).point(y.p.u) - k.chart(y.pp).point(y.pp.u)).squaredNorm();
}

Vec pairAmbient(const ChartedManifold& k, const PairPoint& y) {
    return concat(k.chart(y.p).point(y.p.u), k.chart(y.pp).point(y.pp.u));
}

// -------------------------------------------------------------- chord local

Vec ChordLocal::coordinates(const Vec& yAmbient) const {
    return vectors.transpose() * (G * (toChart * (yAmbient - y)));
}

Vec ChordLocal::displaced(const Vec& chartOffset) const { return y + Jp * chartOffset; }

const char* flowEndName(FlowEnd e) {
    switch (e) {
        case FlowEnd::Chord: return "chord";
        case FlowEnd::Diagonal: return "diagonal";
        case FlowEnd::TimeLimit: return "time-limit";
    }
    return "?";
}

FlowContext::FlowContext(const ChartedManifold& k, const ChordSet& s, MetricSpec g)
    : k_(&k), s_(&s), g_(std::move(g)) {
    eps0_ = s.chords.empty() ? 0.0 : 0.5 * s.minEnergy();
    locals_.reserve(s.chords.size());
    for (const auto& c : s.chords) {
        if (!c.nondegenerate())
            throw HypothesisError(Stage::MorseFlow, "degenerate chord " + std::to_string(c.id) + " in flow context");
        const auto e = chords::energyJet(k, c.p, c.pp, 2);
        ChordLocal l;
        l.id = c.id;
        l.index = c.index;
        l.length = c.length;
        l.y = concat(c.q, c.qp);
        l.G = g_.chartMetric(e.q, e.qp, e.J, e.Jp);
        Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(0.5 * (e.hess + e.hess.transpose()), l.G);
        if (es.info() != Eigen::Success) throw NumericalError(Stage::MorseFlow, "chord linearization failed");
        l.lambda = es.eigenvalues();
        l.vectors = es.eigenvectors();
        const Mat pinvA = (e.J.transpose() * e.J).ldlt().solve(e.J.transpose());
        const Mat pinvB = (e.Jp.transpose() * e.Jp).ldlt().solve(e.Jp.transpose());
        l.toChart = blockDiag(pinvA, pinvB);
        l.Jp = blockDiag(e.J, e.Jp);
        const double lmin = l.lambda.cwiseAbs().minCoeff();
        l.coneRadius = std::max(0.05 * c.length * std::min(1.0, lmin), 1e-3 * c.length);
        // Ten times the positional accuracy of the Newton polish, floored.
        l.shootRadius = 10.0 * std::max(1e-7 * c.length, c.residual / std::max(lmin, 1e-12));
        locals_.push_back(std::move(l));
    }
}

Vec FlowContext::field(const PairPoint& y, int direction) const { return chartField(*k_, g_, y, direction); }

PairPoint FlowContext::chordPoint(int id) const {
    const auto& c = s_->chords.at(static_cast<std::size_t>(id));
    return {c.p, c.pp};
}

PairPoint FlowContext::locate(const Vec& y, const PairPoint& seed) const {
    const auto n = k_->ambientDim();
    auto a = geometry::projectFrom(*k_, y.head(n), seed.p);
    auto b = geometry::projectFrom(*k_, y.tail(n), seed.pp);
    return {a.first, b.first};
}

PairPoint FlowContext::rayStart(int id, const std::vector<int>& dirs, const Vec& coeffs, double r) const {
    const auto& l = local(id);
    Vec off = Vec::Zero(l.vectors.rows());
    for (std::size_t i = 0; i < dirs.size(); ++i) off += coeffs[static_cast<Eigen::Index>(i)] * l.vectors.col(dirs[i]);
    off *= r;
    PairPoint y = chordPoint(id);
    const auto m = y.p.u.size();
    y.p.u = k_->chart(y.p).domain().wrap(y.p.u + off.head(m));
    y.pp.u = k_->chart(y.pp).domain().wrap(y.pp.u + off.tail(off.size() - m));
    return {k_->recentre(y.p), k_->recentre(y.pp)};
}

FlowResult FlowContext::integrate(PairPoint y, const FlowOptions& opt, int watch) const {
    namespace ode = boost::numeric::odeint;
    using State = std::vector<double>;
    const auto m = static_cast<std::size_t>(k_->intrinsicDim());

    PairPoint cur{k_->recentre(y.p), k_->recentre(y.pp)};
    State x(2 * m);
    auto load = [&]() {
        for (std::size_t i = 0; i < m; ++i) {
            x[i] = cur.p.u[static_cast<Eigen::Index>(i)];
            x[m + i] = cur.pp.u[static_cast<Eigen::Index>(i)];
        }
    };
    auto store = [&]() {
        for (std::size_t i = 0; i < m; ++i) {
            cur.p.u[static_cast<Eigen::Index>(i)] = x[i];
            cur.pp.u[static_cast<Eigen::Index>(i)] = x[m + i];
        }
    };
    load();
    auto rhs = [&](const State& s, State& ds, double) {
        PairPoint z = cur;
        for (std::size_t i = 0; i < m; ++i) {
            z.p.u[static_cast<Eigen::Index>(i)] = s[i];
            z.pp.u[static_cast<Eigen::Index>(i)] = s[m + i];
        }
        const Vec v = field(z, opt.direction);
        for (std::size_t i = 0; i < 2 * m; ++i) ds[i] = v[static_cast<Eigen::Index>(i)];
    };
    auto stepper = ode::make_controlled(opt.absTol, opt.relTol, ode::runge_kutta_dopri5<State>());

    FlowResult res;
    double t = 0.0, dt = 1e-3;
    double E = pairEnergy(*k_, cur);
    res.minE = res.maxE = E;
    res.watchDistance = std::numeric_limits<double>::infinity();
    int ignore = opt.ignoreChord;
    const int compA = cur.p.comp, compB = cur.pp.comp;

    auto record = [&](const Vec& yAmb) {
        if (!opt.record) return;
        FlowSample s;
        s.t = t;
        s.E = E;
        s.y = yAmb;
        const Vec v = field(cur, opt.direction);
        const LocalJet a = k_->chart(cur.p).jet(cur.p.u, 1), b = k_->chart(cur.pp).jet(cur.pp.u, 1);
        s.dy = concat(a.J * v.head(static_cast<Eigen::Index>(m)), b.J * v.tail(static_cast<Eigen::Index>(m)));
        s.at = cur;
        res.trace.push_back(std::move(s));
    };

    // Returns true when the flow should stop at the current point.
    auto terminal = [&](const Vec& yAmb) {
        if (watch >= 0) {
            const double dist = (yAmb - local(watch).y).norm();
            if (dist < res.watchDistance) {
                res.watchDistance = dist;
                res.watchCoordinates = local(watch).coordinates(yAmb);
            }
        }
        if (opt.stopAtDiagonal && opt.direction > 0 && E < diagonalEnergy()) {
            res.reason = FlowEnd::Diagonal;
            return true;
        }
        if (!opt.stopAtChords) return false;
        for (const auto& l : locals_) {
            const auto& c = s_->chords[static_cast<std::size_t>(l.id)];
            if (c.p.comp != compA || c.pp.comp != compB) continue;
            const double dist = (yAmb - l.y).norm();
            if (l.id == ignore) {
                if (dist > 2.0 * l.coneRadius) ignore = -1;
                continue;
            }
            if (dist >= l.coneRadius) continue;
            const Vec a = l.coordinates(yAmb);
            double stable = 0.0, unstable = 0.0;
            for (Eigen::Index i = 0; i < a.size(); ++i) (l.lambda[i] < 0 ? unstable : stable) += a[i] * a[i];
            stable = std::sqrt(stable);
            unstable = std::sqrt(unstable);
            const bool inCone = opt.direction > 0 ? unstable <= 0.1 * stable : stable <= 0.1 * unstable;
            if (inCone) {
                res.reason = FlowEnd::Chord;
                res.chord = l.id;
                res.coneCoordinates = a;
                return true;
            }
        }
        return false;
    };

    Vec yAmb = pairAmbient(*k_, cur);
    record(yAmb);
    if (!terminal(yAmb)) {
        const long maxSteps = 400000;
        while (true) {
            if (t >= opt.maxTime || res.steps >= maxSteps) {
                res.reason = FlowEnd::TimeLimit;
                break;
            }
            const double speed = field(cur, opt.direction).norm();
            if (speed * dt > opt.maxChartStep) dt = opt.maxChartStep / speed;
            if (t + dt > opt.maxTime) dt = opt.maxTime - t;
            const auto result = stepper.try_step(rhs, x, t, dt);
            if (result == ode::fail) {
                if (dt < 1e-14) throw NumericalError(Stage::MorseFlow, "flow step collapse");
                continue;
            }
            ++res.steps;
            store();
            cur.p.u = k_->chart(cur.p).domain().wrap(cur.p.u);
            cur.pp.u = k_->chart(cur.pp).domain().wrap(cur.pp.u);
            load();
            const double E1 = pairEnergy(*k_, cur);
            if (opt.direction * (E1 - E) > opt.monotoneTol)
                throw NumericalError(Stage::MorseFlow, "energy not monotone along the flow (jump " +
                                                           std::to_string(opt.direction * (E1 - E)) + ")");
            E = E1;
            res.minE = std::min(res.minE, E);
            res.maxE = std::max(res.maxE, E);
            const auto& ca = k_->chart(cur.p);
            const auto& cb = k_->chart(cur.pp);
            if (!ca.usable(cur.p.u) || !cb.usable(cur.pp.u)) {
                cur.p = k_->recentre(cur.p);
                cur.pp = k_->recentre(cur.pp);
                load();
                stepper.reset();
            }
            yAmb = pairAmbient(*k_, cur);
            record(yAmb);
            if (terminal(yAmb)) break;
        }
    }
    res.end = cur;
    res.E = E;
    res.t = t;
    return res;
}

PairPoint FlowContext::flow(const PairPoint& y, double T) const {
    FlowOptions opt;
    opt.maxTime = T;
    opt.stopAtChords = false;
    opt.stopAtDiagonal = false;
    return integrate(y, opt).end;
}

}  // namespace conormal::morseflow
