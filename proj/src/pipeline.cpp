// Pipelines behind the CLI verbs: chords, Morse complex, coproduct, route
// comparison, validation and the two reproduction runs.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "conormal/cli.hpp"
#include "conormal/errors.hpp"

namespace conormal::cli {

using geometry::ChartedManifold;
using geometry::Vec;

namespace {

double param(const Scenario& s, const std::string& key, double fallback) {
    const auto it = s.params.find(key);
    return it == s.params.end() ? fallback : it->second;
}

int intParam(const Scenario& s, const std::string& key, int fallback) {
    const double v = param(s, key, fallback);
    if (v != std::floor(v)) throw ConfigError("manifold parameter '" + key + "' must be an integer");
    return static_cast<int>(v);
}

chords::SolverConfig solverConfig(const Scenario& s) {
    chords::SolverConfig c;
    c.gridPerDim = s.gridPerDim;
    c.dedupRadius = s.tol.chordDedup;
    c.residualTol = s.tol.chordResidual;
    c.nullBand = s.tol.nullBand;
    return c;
}

bool isSpaceCurve(const ChartedManifold& k) { return k.intrinsicDim() == 1 && k.ambientDim() == 3; }

double diameter(const ChartedManifold& k) {
    const auto pts = k.samples(k.intrinsicDim() == 1 ? 256 : 24);
    double best = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const Vec a = k.point(pts[i]);
        for (std::size_t j = i + 1; j < pts.size(); ++j) best = std::max(best, (a - k.point(pts[j])).norm());
    }
    return best;
}

nlohmann::json header(const Scenario& s, const PreparedManifold& pm) {
    return {{"scenario", s.name},
            {"scenario_hash", s.hash()},
            {"manifold", pm.k.name()},
            {"ambient_dim", pm.k.ambientDim()},
            {"intrinsic_dim", pm.k.intrinsicDim()},
            {"codim", pm.k.codim()},
            {"topology", pm.k.topology().label()},
            {"perturbation_seed", pm.seedUsed},
            {"perturbation_attempts", pm.attempts}};
}

morseflow::MetricSpec metricFor(const Scenario& s, const PreparedManifold& pm, unsigned seed, const char* tag) {
    if (s.metric.amplitude == 0.0 || s.metric.bumps == 0) return morseflow::MetricSpec::base(tag);
    return morseflow::MetricSpec::bumped(pm.k, pm.chords, tag, seed, s.metric.amplitude, s.metric.bumps);
}

void requireMorseRoute(const ChartedManifold& k) {
    if (2 * k.intrinsicDim() > 6)
        throw HypothesisError(Stage::MorseFlow, "the Morse route needs dim(K x K) <= 6, got " +
                                                    std::to_string(2 * k.intrinsicDim()) +
                                                    "; use route = \"algebra\"");
}

std::string chordsCsv(const chords::ChordSet& s, int d) {
    std::ostringstream o;
    o << "id,index,nullity,degree,length,energy,swap\n";
    o.precision(12);
    for (const auto& c : s.chords) {
        o << c.id << ',' << c.index << ',' << c.nullity << ',';
        if (c.nondegenerate()) o << chords::reebDegree(c, d);
        o << ',' << c.length << ',' << c.energy << ',' << c.swapId << '\n';
    }
    return o.str();
}

}  // namespace

// ------------------------------------------------------------------ Report

void Report::write(const std::string& dir) const {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    auto put = [&](const std::string& name, const std::string& text) {
        std::ofstream f(fs::path(dir) / name);
        if (!f) throw ConormalError(Stage::Output, "cannot write " + (fs::path(dir) / name).string());
        f << text;
    };
    put("report.json", json.dump(2) + "\n");
    for (const auto& [name, text] : csv) put(name, text);
    for (const auto& [name, text] : svg) put(name, text);
}

// --------------------------------------------------------------- manifolds

ChartedManifold baseManifold(const Scenario& s) {
    using namespace geometry;
    const std::string& m = s.manifold;
    if (m == "circle") return buildCircle(param(s, "radius", 1.0));
    if (m == "hopf") return buildHopfLink();
    if (m == "ellipsoid") return buildEllipsoid(param(s, "a", 1.0), param(s, "b", 0.8), param(s, "c", 0.6));
    if (m == "torus") return buildRoundTorus(param(s, "R", 1.0), param(s, "r", 0.4));
    if (m == "sphere") return buildRoundSphere(intParam(s, "m", 2));
    if (m == "trefoil") return buildTrefoil(param(s, "R", 1.0), param(s, "r", 0.45));
    if (m == "k0" || m == "k1") {
        const int n = intParam(s, "n", 5), d = intParam(s, "d", 2);
        const auto M = buildNormalizedM("T2", n - d);
        if (m == "k0") return buildK0(n, d, M);
        auto rc = defaultRecipe(n, d, M);
        rc.shift = param(s, "shift", 0.0);
        return buildK1(rc, M).manifold;
    }
    throw ConfigError("unknown manifold kind '" + m + "'");
}

PreparedManifold prepare(const Scenario& s, bool requireNondegenerate) {
    const ChartedManifold base = baseManifold(s);
    const bool perturbed = s.perturbation.kind == "fourier" && s.perturbation.amplitude > 0.0;
    const int maxAttempts = perturbed ? 32 : 1;
    std::string last;
    for (int a = 0; a < maxAttempts; ++a) {
        PreparedManifold pm;
        pm.seedUsed = s.perturbation.seed + static_cast<unsigned>(a);
        pm.attempts = a + 1;
        try {
            pm.k = perturbed ? geometry::perturb(base,
                                                 geometry::NormalSection::fourier(
                                                     base.ambientDim(), pm.seedUsed, s.perturbation.amplitude,
                                                     s.perturbation.modes, s.perturbation.wavenumber))
                             : base;
        } catch (const HypothesisError& e) {
            last = e.what();
            continue;
        }
        pm.chords = chords::findChords(pm.k, solverConfig(s));
        if (requireNondegenerate && !pm.chords.allNondegenerate()) {
            last = "degenerate binormal chords remain";
            continue;
        }
        return pm;
    }
    throw HypothesisError(Stage::Geometry, last + (perturbed ? " after 32 perturbation seeds"
                                                             : "; add a [perturbation] block or re-seed it"));
}

// ------------------------------------------------------------------- verbs

Report runChords(const Scenario& s) {
    const PreparedManifold pm = prepare(s, false);
    Report r;
    r.verb = "chords";
    r.json = header(s, pm);
    r.json["chords"] = pm.chords.toJson();
    const int d = pm.k.codim();
    bool law = true;
    nlohmann::json degrees = nlohmann::json::array();
    for (const auto& c : pm.chords.chords) {
        if (!c.nondegenerate()) continue;
        const int deg = chords::reebDegree(c, d);
        law = law && deg == c.index + d - 2;
        degrees.push_back({{"id", c.id}, {"index", c.index}, {"degree", deg}});
    }
    r.json["degrees"] = degrees;
    r.json["degree_law_holds"] = law;
    r.json["all_nondegenerate"] = pm.chords.allNondegenerate();
    if (pm.chords.allNondegenerate()) {
        const auto star = chords::checkStar(pm.chords, d);
        r.json["star"] = {{"holds", star.holds}, {"message", star.message}};
    }
    r.csv["chords.csv"] = chordsCsv(pm.chords, d);
    if (s.svg && isSpaceCurve(pm.k)) r.svg["chords.svg"] = chordDiagramSvg(pm.k, pm.chords);
    return r;
}

Report runMorse(const Scenario& s) {
    requireMorseRoute(baseManifold(s));
    const PreparedManifold pm = prepare(s, true);
    morseflow::FlowContext g(pm.k, pm.chords, metricFor(s, pm, s.metric.gSeed, "g"));
    const auto cx = morseflow::buildComplex(g);
    const auto hom = cx.homology();
    const auto oracle = algebra::relativeDiagonalDims(pm.k.topology());
    Report r;
    r.verb = "morse";
    r.json = header(s, pm);
    r.json["complex"] = cx.toJson();
    r.json["homology"] = algebra::toJson(hom.dims);
    r.json["oracle"] = algebra::toJson(oracle);
    r.json["square_zero"] = cx.squareZero();
    r.json["oracle_match"] = algebra::normalize(hom.dims) == algebra::normalize(oracle);
    r.csv["homology.csv"] = algebra::toCsv(hom.dims);
    if (!r.json["oracle_match"].get<bool>() || !cx.squareZero()) r.exitCode = 3;
    return r;
}

Report runCoproduct(const Scenario& s) {
    if (!isSpaceCurve(baseManifold(s)))
        throw HypothesisError(Stage::Strops, "the coproduct verb handles closed curves in R^3; use repro k0k1 for "
                                             "the product families");
    const PreparedManifold pm = prepare(s, true);
    Report r;
    r.verb = "coproduct";
    r.json = header(s, pm);
    if (s.route == "geometric") {
        nlohmann::json loci = nlohmann::json::array();
        for (int comp = 0; comp < pm.k.components(); ++comp) {
            const Vec anchor = pm.k.point({comp, 0, Vec::Zero(1)});
            const auto cyc = strops::pointTimesLoop(pm.k, comp, anchor);
            strops::LocusOptions opt;
            opt.hFloor = s.tol.hFloor;
            opt.residualTol = s.tol.locusResidual;
            const auto loc = strops::intersectionLocus(cyc, pm.k, opt);
            loci.push_back(loc.toJson());
            if (!loc.transversal) r.exitCode = 2;
        }
        r.json["route"] = "geometric";
        r.json["loci"] = loci;
        return r;
    }
    morseflow::FlowContext g(pm.k, pm.chords, metricFor(s, pm, s.metric.gSeed, "g"));
    morseflow::FlowContext gp(pm.k, pm.chords, metricFor(s, pm, s.metric.gpSeed, "g'"));
    const auto cg = morseflow::buildComplex(g);
    const auto cgp = morseflow::buildComplex(gp);
    const auto cfg = strops::SplitConfig::fromEnergy(g.epsilon0(), diameter(pm.k), s.tol.tau0Margin);
    const auto delta = strops::morseCoproduct(g, gp, cfg);
    const bool chain = strops::chainMapIdentity(delta, cg, cgp);
    r.json["route"] = "morse";
    r.json["coproduct"] = delta.toJson();
    r.json["chain_map_identity"] = chain;
    r.json["degree_shift_holds"] = delta.degreeShiftHolds();
    r.json["square_zero"] = cg.squareZero() && cgp.squareZero();
    if (!chain || !delta.degreeShiftHolds() || !cg.squareZero() || !cgp.squareZero()) r.exitCode = 3;
    return r;
}

Report runCompare(const Scenario& s) {
    const ChartedManifold base = baseManifold(s);
    if (!isSpaceCurve(base) || base.components() < 2)
        throw HypothesisError(Stage::Strops, "route comparison needs a link of at least two closed curves in R^3");
    const PreparedManifold pm = prepare(s, true);
    morseflow::FlowContext g(pm.k, pm.chords, metricFor(s, pm, s.metric.gSeed, "g"));
    morseflow::FlowContext gp(pm.k, pm.chords, metricFor(s, pm, s.metric.gpSeed, "g'"));
    const auto cg = morseflow::buildComplex(g);
    const auto cfg = strops::SplitConfig::fromEnergy(g.epsilon0(), diameter(pm.k), s.tol.tau0Margin);
    const auto delta = strops::morseCoproduct(g, gp, cfg);
    Report r;
    r.verb = "compare";
    r.json = header(s, pm);
    nlohmann::json comps = nlohmann::json::array();
    bool all = true;
    std::ostringstream csv;
    csv << "component,agree,morse_class,geometric_class\n";
    for (int comp = 0; comp < pm.k.components(); ++comp) {
        // Anchor the point factor at the first chart origin of the component.
        const Vec anchor = pm.k.point({comp, 0, Vec::Zero(1)});
        const auto cyc = strops::pointTimesLoop(pm.k, comp, anchor);
        strops::LocusOptions opt;
        opt.hFloor = s.tol.hFloor;
        opt.residualTol = s.tol.locusResidual;
        const auto loc = strops::intersectionLocus(cyc, pm.k, opt);
        const auto cmp = strops::compareRoutes(pm.k, pm.chords, cg, delta, loc, comp);
        all = all && cmp.agree;
        auto j = cmp.toJson();
        j["component"] = comp;
        j["locus_points"] = loc.points.size();
        comps.push_back(j);
        csv << comp << ',' << (cmp.agree ? 1 : 0) << ',' << j["morse_class"].dump() << ','
            << j["geometric_class"].dump() << '\n';
    }
    r.json["components"] = comps;
    r.json["agree"] = all;
    r.csv["compare.csv"] = csv.str();
    if (!all) r.exitCode = 3;
    return r;
}

Report validate(const Scenario& s) {
    Report r;
    r.verb = "validate";
    nlohmann::json issues = nlohmann::json::array();
    const ChartedManifold base = baseManifold(s);
    const int d = base.codim();
    if (s.lch && d < 4) issues.push_back("lch needs codimension d >= 4 (condition star), got d = " + std::to_string(d));
    if (s.route == "morse" && 2 * base.intrinsicDim() > 6)
        issues.push_back("morse route needs dim(K x K) <= 6, got " + std::to_string(2 * base.intrinsicDim()) +
                         "; use route = \"algebra\"");
    r.json = {{"scenario", s.name}, {"scenario_hash", s.hash()}, {"codim", d},
              {"topology", base.topology().label()}};
    if (s.route != "algebra" && issues.empty()) {
        const PreparedManifold pm = prepare(s, false);
        r.json = header(s, pm);
        if (!pm.chords.allNondegenerate())
            issues.push_back("degenerate binormal chords; re-seed or enlarge the [perturbation] block");
        const auto adm = chords::admissibilityReport(pm.k, pm.chords);
        r.json["admissibility"] = adm.toJson();
        if (!adm.allPass()) issues.push_back("admissibility checks failed");
        if (pm.chords.allNondegenerate()) {
            const auto star = chords::checkStar(pm.chords, d);
            r.json["star"] = {{"holds", star.holds}, {"message", star.message}};
            if (s.lch && !star.holds) issues.push_back("condition star fails: " + star.message);
        }
    }
    r.json["route"] = s.route;
    r.json["issues"] = issues;
    r.json["valid"] = issues.empty();
    if (!issues.empty()) r.exitCode = 2;
    return r;
}

// -------------------------------------------------------------------- repro

Report reproHopf(const HopfReproOptions& opt, const Tolerances& tol) {
    const ChartedManifold k = geometry::buildHopfLink();
    Vec anchor(3);
    anchor << 1.0, 0.0, 0.0;
    const auto cyc = strops::pointTimesLoop(k, 0, anchor);
    strops::LocusOptions lo;
    lo.hFloor = tol.hFloor;
    lo.residualTol = tol.locusResidual;
    // sigma = 0: the endpoints q = (1,0,0) and q' = gamma(theta) stay off the
    // other component and the locus is transversal, so K itself serves.
    const auto loc = strops::intersectionLocus(cyc, k, lo);

    Report r;
    r.verb = "repro-hopf";
    strops::Certificate cert;
    cert.kind = "nonvanishing";
    cert.statement = "hopf-coproduct-nonzero";
    cert.provenance = {{"manifold", "hopf"}, {"sigma", "zero"}};
    cert.hypotheses.push_back({"single-locus-point", loc.points.size() == 1, static_cast<double>(loc.points.size()),
                               "points of the locus above the h floor"});
    cert.hypotheses.push_back({"transversal", loc.transversal && !loc.points.empty(), loc.minSingular,
                               "rank of d ev_c against T K at the locus"});

    nlohmann::json point = nullptr;
    if (loc.points.size() == 1) {
        const auto& p = loc.points.front();
        const double theta = p.z.u[0];
        const auto split = strops::sp(p.q, p.qp, p.tau);
        Vec a(3), b(3), p0 = Vec::Zero(3);
        a << 1.0, 0.0, 0.0;
        b << -1.0, 0.0, 0.0;
        const double eTheta = std::abs(theta - M_PI), eTau = std::abs(p.tau - 0.5);
        const double eSplit = std::max({(split.q - a).norm(), (split.m - p0).norm(), (split.qp - b).norm()});
        cert.hypotheses.push_back({"theta", eTheta < tol.position, eTheta, "|theta - pi|"});
        cert.hypotheses.push_back({"tau", eTau < tol.position, eTau, "|tau - 1/2|"});
        cert.hypotheses.push_back({"split-pairs", eSplit < tol.position, eSplit,
                                   "((1,0,0), p0), (p0, (-1,0,0)) with p0 = (0,0,0)"});
        // The endpoints of both split pairs lie on different components.
        const geometry::SampleCloud cloud(k, 512);
        const int ca = cloud.closestPoint(split.q).first.comp, cm = cloud.closestPoint(split.m).first.comp,
                  cb = cloud.closestPoint(split.qp).first.comp;
        const bool mixed = ca != cm && cm != cb;
        cert.hypotheses.push_back({"components-differ", mixed, 0.0,
                                   "each split pair joins the two components, so its class in H_0(K x K, Delta) "
                                   "is nonzero"});
        point = {{"theta", theta},
                 {"tau", p.tau},
                 {"q", {split.q[0], split.q[1], split.q[2]}},
                 {"midpoint", {split.m[0], split.m[1], split.m[2]}},
                 {"qp", {split.qp[0], split.qp[1], split.qp[2]}},
                 {"components", {ca, cm, cb}}};
    }
    const auto cls = strops::geometricClass(k, loc);
    const strops::ComponentPairBasis basis(k.components());
    nlohmann::json classLabels = nlohmann::json::array();
    for (std::size_t t = 0; t < basis.tensorDim(); ++t)
        if (cls[t]) classLabels.push_back(basis.label(t));
    cert.hypotheses.push_back({"class-nonzero", cls.any(), static_cast<double>(cls.count()),
                               "geometric class in H_0 (x) H_0"});
    cert.evidence = {{"locus", loc.toJson()}, {"point", point}, {"class", classLabels}};
    cert.certified = cert.hypothesesHold();
    cert.verdict = cert.certified ? "delta nonzero on the Hopf link" : "not certified";
    r.json = {{"certificate", cert.toJson()}, {"epsilon1", loc.epsilon1}};
    std::ostringstream csv;
    csv.precision(15);
    csv << "theta,tau,residual,min_singular\n";
    for (const auto& p : loc.points) csv << p.z.u[0] << ',' << p.tau << ',' << p.residual << ',' << p.minSingular << '\n';
    r.csv["locus.csv"] = csv.str();
    if (opt.svg) r.svg["locus.svg"] = locusSvg(loc);
    if (!cert.certified) r.exitCode = 3;
    return r;
}

Report reproK0K1(const K0K1ReproOptions& opt, const Tolerances& tol) {
    if (opt.M != "T2") throw ConfigError("only M = T2 is available");
    if (opt.lch && opt.d < 4) throw HypothesisError(Stage::Algebra, "--lch needs codimension d >= 4");
    strops::K0K1Params p;
    p.n = opt.n;
    p.d = opt.d;
    p.M = opt.M;
    p.qGrid = opt.qGrid;
    p.seed = opt.seed;
    const auto k0 = strops::k0VanishingCertificate(p);
    using LC = strops::LoopChoice;
    const std::vector<std::pair<LC, LC>> loops = {
        {{0, 1}, {0, 1}}, {{0, 1}, {1, 1}}, {{1, 1}, {0, 1}}, {{1, 1}, {1, 1}}};
    const auto k1 = strops::k1NonvanishingCertificate(p, loops);
    const bool clearance = k0.minDistance > tol.k0Clearance;

    const auto M = geometry::buildNormalizedM(opt.M, opt.n - opt.d);
    const auto top = geometry::buildK0(opt.n, opt.d, M).topology();
    const auto rel = algebra::relativeDiagonalDims(top);
    algebra::InvariantData a{"K0", opt.d, rel, k0.delta}, b{"K1", opt.d, rel, k1.delta};
    const auto cmp = algebra::compareInvariants(a, b);

    Report r;
    r.verb = "repro-k0k1";
    strops::Certificate dist;
    dist.kind = "distinguished";
    dist.statement = "k0k1-distinguished";
    dist.provenance = {{"n", opt.n}, {"d", opt.d}, {"M", opt.M}, {"seed", opt.seed}};
    dist.hypotheses.push_back({"k0-vanishing", k0.certificate.certified && clearance, k0.minDistance,
                               "delta_K0 = 0 certificate with clearance above " + std::to_string(tol.k0Clearance)});
    dist.hypotheses.push_back({"k1-nonvanishing", k1.certificate.certified, static_cast<double>(k1.certifiedRank),
                               "delta_K1 rank lower bound"});
    dist.evidence = cmp.toJson();
    dist.certified = dist.hypothesesHold() && cmp.verdict == algebra::Verdict::Distinguished;
    dist.verdict = algebra::verdictName(cmp.verdict);
    if (!cmp.legendrianLevel) dist.verdict += " (coproduct-level only)";

    const auto tb = algebra::tbCertificate(top);
    strops::Certificate tbc;
    tbc.kind = "tb-zero";
    tbc.statement = "tb-zero";
    tbc.hypotheses.push_back({"euler-zero", tb.certified, static_cast<double>(tb.euler), tb.reason});
    tbc.certified = tb.certified;
    tbc.verdict = tb.certified ? "tb = 0 for both conormal bundles" : "no certificate";

    r.json = {{"n", opt.n},
              {"d", opt.d},
              {"M", opt.M},
              {"verdict", dist.verdict},
              {"relative_homology", algebra::toJson(rel)},
              {"certificates",
               {k0.certificate.toJson(), k1.certificate.toJson(), dist.toJson(), tbc.toJson()}}};

    if (opt.lch) {
        const auto l0 = algebra::lchDimsLow(rel, opt.d, k0.delta);
        const auto l1 = algebra::lchDimsLow(rel, opt.d, k1.delta);
        const int kk = 1;
        const int pg = 2 * kk + 2 * opt.d - 4;
        const int src = 2 * kk + opt.d - 1;
        std::ostringstream csv;
        csv << "p,K0_lo,K0_hi,K1_lo,K1_hi\n";
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& [deg, b0] : l0) {
            const auto& b1 = l1.at(deg);
            csv << deg << ',' << b0.lo << ',' << b0.hi << ',' << b1.lo << ',' << b1.hi << '\n';
            rows.push_back({{"p", deg}, {"K0", algebra::toJson(b0)}, {"K1", algebra::toJson(b1)}});
        }
        r.csv["lch.csv"] = csv.str();
        strops::Certificate lc;
        lc.kind = "nonvanishing";
        lc.statement = "k0k1-lch-gap";
        lc.provenance = dist.provenance;
        const auto b0 = l0.count(pg) ? l0.at(pg) : algebra::Bound{};
        const auto b1 = l1.count(pg) ? l1.at(pg) : algebra::Bound{};
        const auto rk = k1.delta.rank(src);
        const bool inWindow = l0.count(pg) == 1;
        lc.hypotheses.push_back({"degree-in-window", inWindow, static_cast<double>(pg), "1 <= p <= 3d - 7"});
        lc.hypotheses.push_back({"strict-inequality", inWindow && b0.exact() && b1.hi < b0.lo,
                                 static_cast<double>(b0.lo - b1.hi), "LCH_p(K0) > LCH_p(K1)"});
        lc.hypotheses.push_back({"gap-equals-rank", inWindow && b0.exact() && b1.exact() && rk.exact() &&
                                                        b0.lo - b1.lo == rk.lo,
                                 static_cast<double>(rk.lo),
                                 "gap equals rank delta_K1 on H_" + std::to_string(src) +
                                     " through the cokernel term"});
        lc.evidence = {{"p", pg}, {"source_degree", src}, {"table", rows}};
        lc.certified = lc.hypothesesHold();
        lc.verdict = lc.certified ? "dim LCH_" + std::to_string(pg) + " differs: " + std::to_string(b0.lo) +
                                        " > " + std::to_string(b1.lo)
                                  : "not certified";
        r.json["certificates"].push_back(lc.toJson());
        r.json["lch"] = {{"p", pg}, {"K0", algebra::toJson(b0)}, {"K1", algebra::toJson(b1)},
                         {"rank", algebra::toJson(rk)}, {"table", rows}};
        if (!lc.certified) r.exitCode = 2;
    }
    if (!dist.certified) r.exitCode = 2;
    return r;
}

}  // namespace conormal::cli
