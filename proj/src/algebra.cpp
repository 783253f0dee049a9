#include "conormal/algebra.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "conormal/errors.hpp"

namespace conormal::algebra {

// ---------------------------------------------------------------- GradedDims

GradedDims normalize(const GradedDims& a) {
    GradedDims out;
    for (auto [k, v] : a) {
        if (v < 0) throw ConormalError(Stage::Algebra, "negative dimension in graded table");
        if (v != 0) out[k] = v;
    }
    return out;
}

long long dimAt(const GradedDims& a, int degree) {
    auto it = a.find(degree);
    return it == a.end() ? 0 : it->second;
}

GradedDims add(const GradedDims& a, const GradedDims& b) {
    GradedDims out = a;
    for (auto [k, v] : b) out[k] += v;
    return normalize(out);
}

GradedDims subtract(const GradedDims& a, const GradedDims& b) {
    GradedDims out = a;
    for (auto [k, v] : b) {
        out[k] -= v;
        if (out[k] < 0)
            throw ConormalError(Stage::Algebra,
                                "graded subtraction went negative in degree " + std::to_string(k));
    }
    return normalize(out);
}

GradedDims convolve(const GradedDims& a, const GradedDims& b) {
    GradedDims out;
    for (auto [i, x] : a)
        for (auto [j, y] : b) out[i + j] += x * y;
    return normalize(out);
}

GradedDims shift(const GradedDims& a, int by) {
    GradedDims out;
    for (auto [k, v] : a) out[k + by] = v;
    return out;
}

long long total(const GradedDims& a) {
    long long s = 0;
    for (auto [k, v] : a) s += v;
    return s;
}

long long eulerCharacteristic(const GradedDims& a) {
    long long s = 0;
    for (auto [k, v] : a) s += (k % 2 == 0 ? v : -v);
    return s;
}

std::vector<long long> toVector(const GradedDims& a, int maxDegree) {
    std::vector<long long> v(static_cast<std::size_t>(maxDegree + 1), 0);
    for (auto [k, x] : a)
        if (k >= 0 && k <= maxDegree) v[static_cast<std::size_t>(k)] = x;
    return v;
}

GradedDims fromVector(const std::vector<long long>& v) {
    GradedDims out;
    for (std::size_t k = 0; k < v.size(); ++k) out[static_cast<int>(k)] = v[k];
    return normalize(out);
}

namespace {

long long binomial(int n, int k) {
    long long r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

}  // namespace

GradedDims betti(const Factor& f) {
    switch (f.kind) {
        case Factor::Kind::Point:
            return {{0, 1}};
        case Factor::Kind::Sphere:
            if (f.dim < 0) break;
            if (f.dim == 0) return {{0, 2}};
            return {{0, 1}, {f.dim, 1}};
        case Factor::Kind::Torus: {
            if (f.dim < 0) break;
            GradedDims out;
            for (int k = 0; k <= f.dim; ++k) out[k] = binomial(f.dim, k);
            return out;
        }
    }
    throw ConormalError(Stage::Algebra, "unknown factor " + f.label());
}

GradedDims betti(const ProductTopology& p) {
    GradedDims out{{0, 1}};
    for (const auto& f : p.factors) out = convolve(out, betti(f));
    return out;
}

GradedDims betti(const Topology& t) {
    GradedDims out;
    for (const auto& c : t.components) out = add(out, betti(c));
    return out;
}

GradedDims relativeDiagonalDims(const Topology& k) {
    const GradedDims b = betti(k);
    return subtract(convolve(b, b), b);
}

GradedDims relativeSquareDims(const GradedDims& rel) { return convolve(rel, rel); }

GradedDims relativeSquareDims(const Topology& k) { return relativeSquareDims(relativeDiagonalDims(k)); }

GradedDims hlDims(const Topology& k, int d) {
    if (d < 4)
        throw HypothesisError(Stage::Algebra,
                              "strip contact homology formula needs codimension >= 4, got " +
                                  std::to_string(d));
    return shift(relativeDiagonalDims(k), d - 2);
}

// ---------------------------------------------------------------- Mod2Matrix

Mod2Matrix::Mod2Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows, Bits(cols)) {}

Mod2Matrix Mod2Matrix::identity(std::size_t n) {
    Mod2Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m.set(i, i, true);
    return m;
}

Bits Mod2Matrix::column(std::size_t c) const {
    Bits out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = data_[r][c];
    return out;
}

Bits Mod2Matrix::apply(const Bits& x) const {
    if (x.size() != cols_) throw ConormalError(Stage::Algebra, "matrix-vector shape mismatch");
    Bits out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (data_[r] & x).count() % 2 == 1;
    return out;
}

Mod2Matrix Mod2Matrix::transpose() const {
    Mod2Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = data_[r].find_first(); c != Bits::npos; c = data_[r].find_next(c))
            t.set(c, r, true);
    return t;
}

bool Mod2Matrix::isZero() const {
    return std::all_of(data_.begin(), data_.end(), [](const Bits& b) { return b.none(); });
}

std::size_t Mod2Matrix::nonzeros() const {
    std::size_t n = 0;
    for (const auto& r : data_) n += r.count();
    return n;
}

std::size_t Mod2Matrix::rank() const {
    EchelonSpan span(cols_);
    std::size_t r = 0;
    for (const auto& row : data_)
        if (span.add(row)) ++r;
    return r;
}

Mod2Matrix operator*(const Mod2Matrix& a, const Mod2Matrix& b) {
    if (a.cols_ != b.rows_) throw ConormalError(Stage::Algebra, "matrix product shape mismatch");
    Mod2Matrix out(a.rows_, b.cols_);
    for (std::size_t r = 0; r < a.rows_; ++r) {
        Bits acc(b.cols_);
        const Bits& ar = a.data_[r];
        for (std::size_t k = ar.find_first(); k != Bits::npos; k = ar.find_next(k)) acc ^= b.data_[k];
        out.data_[r] = acc;
    }
    return out;
}

Mod2Matrix operator+(const Mod2Matrix& a, const Mod2Matrix& b) {
    if (a.rows_ != b.rows_ || a.cols_ != b.cols_)
        throw ConormalError(Stage::Algebra, "matrix sum shape mismatch");
    Mod2Matrix out = a;
    for (std::size_t r = 0; r < a.rows_; ++r) out.data_[r] ^= b.data_[r];
    return out;
}

bool operator==(const Mod2Matrix& a, const Mod2Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
}

Mod2Matrix Mod2Matrix::kron(const Mod2Matrix& a, const Mod2Matrix& b) {
    Mod2Matrix out(a.rows_ * b.rows_, a.cols_ * b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i)
        for (std::size_t k = 0; k < a.cols_; ++k) {
            if (!a.get(i, k)) continue;
            for (std::size_t j = 0; j < b.rows_; ++j)
                for (std::size_t l = 0; l < b.cols_; ++l)
                    if (b.get(j, l)) out.set(i * b.rows_ + j, k * b.cols_ + l, true);
        }
    return out;
}

nlohmann::json Mod2Matrix::toJson() const {
    nlohmann::json rowsJson = nlohmann::json::array();
    for (const auto& r : data_) {
        // Bit c lives in byte c/8 at position c%8; bytes are printed in order.
        std::string hex;
        const std::size_t bytes = (cols_ + 7) / 8;
        for (std::size_t byte = 0; byte < bytes; ++byte) {
            unsigned v = 0;
            for (std::size_t bit = 0; bit < 8; ++bit) {
                const std::size_t c = byte * 8 + bit;
                if (c < cols_ && r[c]) v |= 1u << bit;
            }
            char buf[3];
            std::snprintf(buf, sizeof buf, "%02x", v);
            hex += buf;
        }
        rowsJson.push_back(hex);
    }
    return {{"rows", rows_}, {"cols", cols_}, {"packed_rows", rowsJson}};
}

// --------------------------------------------------------------- EchelonSpan

bool EchelonSpan::add(const Bits& v) {
    if (v.size() != dim_) throw ConormalError(Stage::Algebra, "echelon span dimension mismatch");
    const std::size_t gen = added_++;
    Bits r = v;
    Bits combo(added_);
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        if (r[pivots_[i]]) {
            r ^= rows_[i];
            Bits c = combos_[i];
            c.resize(added_);
            combo ^= c;
        }
    }
    const std::size_t p = r.find_first();
    if (p == Bits::npos) return false;
    combo[gen] = !combo[gen];
    pivots_.push_back(p);
    rows_.push_back(std::move(r));
    combos_.push_back(std::move(combo));
    return true;
}

std::optional<Bits> EchelonSpan::express(const Bits& v) const {
    Bits r = v;
    Bits combo(added_);
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        if (r[pivots_[i]]) {
            r ^= rows_[i];
            Bits c = combos_[i];
            c.resize(added_);
            combo ^= c;
        }
    }
    if (r.any()) return std::nullopt;
    return combo;
}

bool EchelonSpan::contains(const Bits& v) const { return express(v).has_value(); }

std::vector<Bits> kernelBasis(const Mod2Matrix& m) {
    // Reduced row echelon form; one kernel vector per free column.
    std::vector<Bits> out;
    const std::size_t rows = m.rows(), cols = m.cols();
    std::vector<Bits> a;
    for (std::size_t r = 0; r < rows; ++r) a.push_back(m.row(r));
    std::vector<std::size_t> pivotCol;
    std::size_t rank = 0;
    for (std::size_t c = 0; c < cols && rank < rows; ++c) {
        std::size_t sel = rank;
        while (sel < rows && !a[sel][c]) ++sel;
        if (sel == rows) continue;
        std::swap(a[sel], a[rank]);
        for (std::size_t r = 0; r < rows; ++r)
            if (r != rank && a[r][c]) a[r] ^= a[rank];
        pivotCol.push_back(c);
        ++rank;
    }
    std::vector<bool> isPivot(cols, false);
    for (auto c : pivotCol) isPivot[c] = true;
    for (std::size_t f = 0; f < cols; ++f) {
        if (isPivot[f]) continue;
        Bits k(cols);
        k[f] = true;
        for (std::size_t i = 0; i < pivotCol.size(); ++i)
            if (a[i][f]) k[pivotCol[i]] = true;
        out.push_back(std::move(k));
    }
    return out;
}

// --------------------------------------------------------------- Mod2Complex

void Mod2Complex::setBasis(int degree, std::vector<std::string> labels) {
    basis_[degree] = std::move(labels);
}

void Mod2Complex::setDifferential(int degree, Mod2Matrix m) { d_[degree] = std::move(m); }

std::size_t Mod2Complex::dim(int degree) const {
    auto it = basis_.find(degree);
    return it == basis_.end() ? 0 : it->second.size();
}

const std::vector<std::string>& Mod2Complex::basis(int degree) const {
    static const std::vector<std::string> empty;
    auto it = basis_.find(degree);
    return it == basis_.end() ? empty : it->second;
}

Mod2Matrix Mod2Complex::differential(int degree) const {
    auto it = d_.find(degree);
    if (it != d_.end()) return it->second;
    return Mod2Matrix(dim(degree - 1), dim(degree));
}

std::vector<int> Mod2Complex::degrees() const {
    std::set<int> s;
    for (const auto& [k, v] : basis_)
        if (!v.empty()) s.insert(k);
    return {s.begin(), s.end()};
}

std::optional<int> Mod2Complex::squareZeroFailure() const {
    for (const auto& [k, m] : d_) {
        if (m.rows() != dim(k - 1) || m.cols() != dim(k))
            throw ConormalError(Stage::Algebra, "differential shape mismatch in degree " + std::to_string(k));
        auto next = d_.find(k - 1);
        if (next == d_.end()) continue;
        if (!(next->second * m).isZero()) return k;
    }
    return std::nullopt;
}

void Mod2Complex::validate() const {
    if (auto k = squareZeroFailure())
        throw NumericalError(Stage::Algebra, "d o d != 0 starting in degree " + std::to_string(*k));
}

HomologyData homology(const Mod2Complex& c) {
    c.validate();
    HomologyData out;
    for (int k : c.degrees()) {
        const std::size_t n = c.dim(k);
        const Mod2Matrix dk = c.differential(k);
        const Mod2Matrix dk1 = c.differential(k + 1);
        EchelonSpan span(n);
        for (std::size_t j = 0; j < dk1.cols(); ++j) span.add(dk1.column(j));
        std::vector<Bits> reps;
        for (const Bits& z : kernelBasis(dk))
            if (span.add(z)) reps.push_back(z);
        if (!reps.empty()) {
            out.dims[k] = static_cast<long long>(reps.size());
            out.representatives[k] = std::move(reps);
        }
    }
    return out;
}

std::optional<Bits> homologyCoordinates(const Mod2Complex& c, const HomologyData& h, int degree,
                                        const Bits& cycle) {
    if (cycle.size() != c.dim(degree)) throw ConormalError(Stage::Algebra, "cycle has wrong length");
    if (c.differential(degree).apply(cycle).any()) return std::nullopt;
    const auto it = h.representatives.find(degree);
    const std::size_t r = it == h.representatives.end() ? 0 : it->second.size();
    EchelonSpan span(c.dim(degree));
    if (r > 0)
        for (const auto& rep : it->second) span.add(rep);
    const Mod2Matrix d1 = c.differential(degree + 1);
    for (std::size_t j = 0; j < d1.cols(); ++j) span.add(d1.column(j));
    auto combo = span.express(cycle);
    if (!combo) throw NumericalError(Stage::Algebra, "cycle not spanned by homology basis and boundaries");
    Bits coords(r);
    for (std::size_t i = 0; i < r; ++i) coords[i] = (*combo)[i];
    return coords;
}

// ------------------------------------------------ homology-level coproduct

HomologyCoproduct HomologyCoproduct::zero(const GradedDims& rel, int d) {
    HomologyCoproduct h;
    h.d = d;
    h.source = normalize(rel);
    h.target = relativeSquareDims(rel);
    for (auto [p, dim] : h.source) h.ranks[p] = {0, 0};
    return h;
}

HomologyCoproduct HomologyCoproduct::unknown(const GradedDims& rel, int d) {
    HomologyCoproduct h;
    h.d = d;
    h.source = normalize(rel);
    h.target = relativeSquareDims(rel);
    return h;
}

void HomologyCoproduct::certifyLowerBound(int p, long long lo) {
    Bound b = rank(p);
    if (lo > b.hi)
        throw ConormalError(Stage::Algebra, "certified rank exceeds the dimension bound at degree " +
                                                std::to_string(p));
    b.lo = std::max(b.lo, lo);
    ranks[p] = b;
}

void HomologyCoproduct::setMatrix(int p, const Mod2Matrix& m) {
    if (static_cast<long long>(m.cols()) != dimAt(source, p) ||
        static_cast<long long>(m.rows()) != dimAt(target, p - d + 1))
        throw ConormalError(Stage::Algebra, "coproduct matrix shape mismatch at degree " + std::to_string(p));
    const auto r = static_cast<long long>(m.rank());
    ranks[p] = {r, r};
}

Bound HomologyCoproduct::rank(int p) const {
    const long long cap = std::min(dimAt(source, p), dimAt(target, p - d + 1));
    if (cap == 0) return {0, 0};
    auto it = ranks.find(p);
    if (it != ranks.end()) return it->second;
    return {0, cap};
}

Bound lchDim(const GradedDims& rel, int d, const HomologyCoproduct& delta, int p) {
    if (d < 4)
        throw HypothesisError(Stage::Algebra, "low-degree contact homology formula needs codimension >= 4");
    if (p < 1 || p > 3 * d - 7)
        throw ConormalError(Stage::Algebra, "degree " + std::to_string(p) + " outside the window 1.." +
                                                std::to_string(3 * d - 7));
    if (delta.d != d) throw ConormalError(Stage::Algebra, "coproduct codimension mismatch");
    const GradedDims sq = relativeSquareDims(rel);
    const int a = p - d + 2;  // kernel part, source degree
    const int b = p - d + 3;  // cokernel part, source degree
    const long long s = dimAt(rel, a);
    const long long t = dimAt(sq, b - d + 1);
    const Bound r1 = delta.rank(a), r2 = delta.rank(b);
    return {s - r1.hi + t - r2.hi, s - r1.lo + t - r2.lo};
}

std::map<int, Bound> lchDimsLow(const GradedDims& rel, int d, const HomologyCoproduct& delta) {
    // The window 1..3d-7 is empty below d = 3, so check before looping.
    if (d < 4)
        throw HypothesisError(Stage::Algebra, "low-degree contact homology formula needs codimension >= 4");
    std::map<int, Bound> out;
    for (int p = 1; p <= 3 * d - 7; ++p) out[p] = lchDim(rel, d, delta, p);
    return out;
}

// -------------------------------------------------------- invariant compare

const char* verdictName(Verdict v) {
    return v == Verdict::Distinguished ? "DISTINGUISHED" : "INCONCLUSIVE";
}

nlohmann::json toJson(const Bound& b) {
    if (b.exact()) return b.lo;
    return {{"lo", b.lo}, {"hi", b.hi}};
}

nlohmann::json Comparison::toJson() const {
    nlohmann::json dims = nlohmann::json::array(), ranks = nlohmann::json::array();
    for (const auto& [i, p] : alignedDims) dims.push_back({{"degree", i}, {"a", p.first}, {"b", p.second}});
    for (const auto& [i, p] : alignedRanks)
        ranks.push_back({{"degree", i}, {"a", algebra::toJson(p.first)}, {"b", algebra::toJson(p.second)}});
    return {{"verdict", verdictName(verdict)},
            {"level", legendrianLevel ? "legendrian" : "coproduct-level only"},
            {"evidence", evidence},
            {"aligned_dims", dims},
            {"aligned_delta_ranks", ranks}};
}

Comparison compareInvariants(const InvariantData& a, const InvariantData& b) {
    if (a.codim < 1 || b.codim < 1) throw ConormalError(Stage::Algebra, "malformed codimension");
    if (a.delta.d != a.codim || b.delta.d != b.codim)
        throw ConormalError(Stage::Algebra, "coproduct grading does not match the codimension");
    Comparison out;
    out.legendrianLevel = a.codim >= 4 && b.codim >= 4;
    std::set<int> degrees;
    for (auto [k, v] : a.rel) degrees.insert(k + a.codim);
    for (auto [k, v] : b.rel) degrees.insert(k + b.codim);
    for (int i : degrees) {
        const long long da = dimAt(a.rel, i - a.codim), db = dimAt(b.rel, i - b.codim);
        out.alignedDims[i] = {da, db};
        if (da != db)
            out.evidence.push_back("aligned degree " + std::to_string(i) + ": homology dims " +
                                   std::to_string(da) + " vs " + std::to_string(db));
        const Bound ra = a.delta.rank(i - a.codim), rb = b.delta.rank(i - b.codim);
        out.alignedRanks[i] = {ra, rb};
        if (ra.hi < rb.lo || rb.hi < ra.lo) {
            auto show = [](const Bound& r) {
                return r.exact() ? std::to_string(r.lo)
                                 : "[" + std::to_string(r.lo) + "," + std::to_string(r.hi) + "]";
            };
            out.evidence.push_back("aligned degree " + std::to_string(i) + ": coproduct rank " + show(ra) +
                                   " vs " + show(rb));
        }
    }
    out.verdict = out.evidence.empty() ? Verdict::Inconclusive : Verdict::Distinguished;
    return out;
}

// --------------------------------------------------------------- certificates

TbCertificate tbCertificate(const Topology& k) {
    TbCertificate c;
    c.euler = eulerCharacteristic(betti(k));
    if (!k.connected()) {
        c.reason = "manifold is not connected";
        return c;
    }
    if (c.euler == 0) {
        c.certified = true;
        c.reason = "Euler characteristic vanishes, so a nowhere-vanishing vector field exists; tb = 0";
    } else {
        c.reason = "Euler characteristic " + std::to_string(c.euler) + " is nonzero; no certificate";
    }
    return c;
}

int FactorCycle::dim() const {
    int s = 0;
    for (int m : qFactorDims) s += m;
    return s;
}

std::vector<Factor> splitFactors(const ProductTopology& m) {
    std::vector<Factor> out;
    for (const auto& f : m.factors) {
        if (f.kind == Factor::Kind::Torus)
            for (int i = 0; i < f.dim; ++i) out.push_back(Factor::circle());
        else if (f.kind == Factor::Kind::Sphere)
            out.push_back(f);
    }
    return out;
}

bool pushforwardNonzero(const ProductTopology& m, const FactorCycle& b) {
    const auto factors = splitFactors(m);
    if (b.target.size() != b.qFactorDims.size() || b.degree.size() != b.qFactorDims.size())
        throw ConormalError(Stage::Algebra, "malformed factor cycle");
    std::set<int> used;
    for (std::size_t i = 0; i < b.qFactorDims.size(); ++i) {
        const int t = b.target[i];
        if (b.qFactorDims[i] == 0) continue;
        if (t < 0) return false;  // a positive-dimensional factor collapses
        if (t >= static_cast<int>(factors.size()))
            throw ConormalError(Stage::Algebra, "factor cycle targets a missing factor");
        if (factors[static_cast<std::size_t>(t)].dim != b.qFactorDims[i]) return false;
        if (b.degree[i] % 2 == 0) return false;
        if (!used.insert(t).second) return false;  // two factors into one sphere
    }
    return true;
}

PairingResult projectionPairing(const ProductTopology& m, const FactorCycle& b1, const FactorCycle& b2) {
    for (const auto& f : m.factors)
        if (f.kind == Factor::Kind::Point && m.factors.size() == 1)
            throw ConormalError(Stage::Algebra, "pairing needs a positive-dimensional product M");
    PairingResult r;
    r.degree = b1.dim();
    if (b2.dim() != b1.dim()) throw ConormalError(Stage::Algebra, "pairing cycles have different degrees");
    const bool n1 = pushforwardNonzero(m, b1), n2 = pushforwardNonzero(m, b2);
    r.nonzero = n1 && n2;
    r.explanation = std::string("b1_*[Q1] ") + (n1 ? "!= 0" : "= 0") + ", b2_*[Q2] " + (n2 ? "!= 0" : "= 0") +
                    " in H_" + std::to_string(r.degree) + "(" + m.label() + "; Z/2)";
    return r;
}

std::string toCsv(const GradedDims& a) {
    std::ostringstream os;
    os << "degree,dim\n";
    for (auto [k, v] : a) os << k << ',' << v << '\n';
    return os.str();
}

nlohmann::json toJson(const GradedDims& a) {
    nlohmann::json j = nlohmann::json::object();
    for (auto [k, v] : a) j[std::to_string(k)] = v;
    return j;
}

}  // namespace conormal::algebra
