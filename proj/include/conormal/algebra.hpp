#pragma once

// Mod-2 homological algebra: chain complexes, Betti bookkeeping for product
// manifolds, relative homology of (K x K, diagonal), the strip and low-degree
// Legendrian contact homology dimension formulas, and invariant comparison.

#include <boost/dynamic_bitset.hpp>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "conormal/topology.hpp"

namespace conormal::algebra {

using Bits = boost::dynamic_bitset<>;

// ---------------------------------------------------------------- GradedDims

// Degree -> dimension over Z/2.  Zero entries are dropped by normalize().
using GradedDims = std::map<int, long long>;

GradedDims normalize(const GradedDims& a);
long long dimAt(const GradedDims& a, int degree);
GradedDims add(const GradedDims& a, const GradedDims& b);
// Degreewise a - b; throws if a coefficient would turn negative.
GradedDims subtract(const GradedDims& a, const GradedDims& b);
// Kunneth convolution (a*b)_k = sum_{i+j=k} a_i b_j.
GradedDims convolve(const GradedDims& a, const GradedDims& b);
GradedDims shift(const GradedDims& a, int by);
long long total(const GradedDims& a);
long long eulerCharacteristic(const GradedDims& a);
// Dense vector over degrees 0..maxDegree, handy for printing.
std::vector<long long> toVector(const GradedDims& a, int maxDegree);
GradedDims fromVector(const std::vector<long long>& v);

GradedDims betti(const Factor& f);
GradedDims betti(const ProductTopology& p);
GradedDims betti(const Topology& t);

// dim H_*(K x K, Delta_K), through the split exact sequence of the pair.
GradedDims relativeDiagonalDims(const Topology& k);
// dim H_*((K x K, Delta_K)^{x2}), Kunneth square of the relative dims.
GradedDims relativeSquareDims(const Topology& k);
GradedDims relativeSquareDims(const GradedDims& rel);
// Strip contact homology dims: HL_p = dim H_{p-d+2}(K x K, Delta_K).
GradedDims hlDims(const Topology& k, int d);

// ---------------------------------------------------------------- Mod2Matrix

class Mod2Matrix {
public:
    Mod2Matrix() = default;
    Mod2Matrix(std::size_t rows, std::size_t cols);
    static Mod2Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool get(std::size_t r, std::size_t c) const { return data_[r][c]; }
    void set(std::size_t r, std::size_t c, bool v) { data_[r][c] = v; }
    void flip(std::size_t r, std::size_t c) { data_[r].flip(c); }
    const Bits& row(std::size_t r) const { return data_[r]; }

    Bits column(std::size_t c) const;
    Bits apply(const Bits& x) const;  // y = A x
    Mod2Matrix transpose() const;
    bool isZero() const;
    std::size_t rank() const;
    std::size_t nonzeros() const;

    friend Mod2Matrix operator*(const Mod2Matrix& a, const Mod2Matrix& b);
    friend Mod2Matrix operator+(const Mod2Matrix& a, const Mod2Matrix& b);
    friend bool operator==(const Mod2Matrix& a, const Mod2Matrix& b);

    // Kronecker product a (x) b with row/column index i*dim(b)+j.
    static Mod2Matrix kron(const Mod2Matrix& a, const Mod2Matrix& b);

    nlohmann::json toJson() const;  // rows as hex-packed bit strings

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<Bits> data_;
};

// Incremental row-echelon span over Z/2 that remembers how each stored
// vector combines the inputs added so far.
class EchelonSpan {
public:
    explicit EchelonSpan(std::size_t dim) : dim_(dim) {}
    // Adds v; returns false (and stores nothing) if v is already spanned.
    bool add(const Bits& v);
    // Returns the combination of added generators equal to v, if any.
    std::optional<Bits> express(const Bits& v) const;
    bool contains(const Bits& v) const;
    std::size_t size() const { return pivots_.size(); }
    std::size_t generators() const { return added_; }

private:
    std::size_t dim_;
    std::size_t added_ = 0;
    std::vector<std::size_t> pivots_;
    std::vector<Bits> rows_;
    std::vector<Bits> combos_;
};

// Basis of the null space of m (vectors x with m x = 0).
std::vector<Bits> kernelBasis(const Mod2Matrix& m);

// --------------------------------------------------------------- Mod2Complex

// Graded Z/2 complex.  differential(k) maps C_k -> C_{k-1} and is stored as a
// dim C_{k-1} by dim C_k matrix.
class Mod2Complex {
public:
    void setBasis(int degree, std::vector<std::string> labels);
    void setDifferential(int degree, Mod2Matrix m);

    std::size_t dim(int degree) const;
    const std::vector<std::string>& basis(int degree) const;
    Mod2Matrix differential(int degree) const;
    std::vector<int> degrees() const;
    // Checks shapes and d o d = 0; returns the first failing degree.
    std::optional<int> squareZeroFailure() const;
    void validate() const;  // throws on shape mismatch or d o d != 0

private:
    std::map<int, std::vector<std::string>> basis_;
    std::map<int, Mod2Matrix> d_;
};

struct HomologyData {
    GradedDims dims;
    // Representative cycles by degree, expressed in the chain basis.
    std::map<int, std::vector<Bits>> representatives;
};

HomologyData homology(const Mod2Complex& c);

// Coordinates of a cycle in the chosen homology basis, or nullopt when the
// vector is not a cycle.
std::optional<Bits> homologyCoordinates(const Mod2Complex& c, const HomologyData& h, int degree,
                                        const Bits& cycle);

// ------------------------------------------------ homology-level coproduct

// Lower and upper bounds on an integer quantity.  Exact when lo == hi.
struct Bound {
    long long lo = 0, hi = 0;
    bool exact() const { return lo == hi; }
    bool operator==(const Bound&) const = default;
};

// Rank data of delta : H_p(K x K, Delta) -> H_{p-d+1}((K x K, Delta)^{x2}),
// indexed by the source degree p.  Degrees with no recorded data are
// unknown, bounded only by the dimensions of source and target.
struct HomologyCoproduct {
    int d = 0;
    GradedDims source;
    GradedDims target;
    std::map<int, Bound> ranks;

    static HomologyCoproduct zero(const GradedDims& rel, int d);
    static HomologyCoproduct unknown(const GradedDims& rel, int d);
    // Records a certified lower bound on the rank at source degree p.
    void certifyLowerBound(int p, long long lo);
    void setMatrix(int p, const Mod2Matrix& m);
    Bound rank(int p) const;
};

// dim LCH_p for 1 <= p <= 3d-7, from the kernel and cokernel of delta.
Bound lchDim(const GradedDims& rel, int d, const HomologyCoproduct& delta, int p);
std::map<int, Bound> lchDimsLow(const GradedDims& rel, int d, const HomologyCoproduct& delta);

// -------------------------------------------------------- invariant compare

enum class Verdict { Distinguished, Inconclusive };
const char* verdictName(Verdict v);

struct InvariantData {
    std::string label;
    int codim = 0;
    GradedDims rel;  // dims H_*(K x K, Delta_K)
    HomologyCoproduct delta;
};

struct Comparison {
    Verdict verdict = Verdict::Inconclusive;
    bool legendrianLevel = false;  // false: only a statement about the coproduct
    std::vector<std::string> evidence;
    // Aligned degree i -> (dim for A, dim for B) after the shift by codim.
    std::map<int, std::pair<long long, long long>> alignedDims;
    // Aligned source degree i -> (rank for A, rank for B).
    std::map<int, std::pair<Bound, Bound>> alignedRanks;
    nlohmann::json toJson() const;
};

Comparison compareInvariants(const InvariantData& a, const InvariantData& b);

// --------------------------------------------------------------- certificates

struct TbCertificate {
    bool certified = false;
    long long euler = 0;
    std::string reason;
};
TbCertificate tbCertificate(const Topology& k);

// A product cycle b : Q -> M, where Q = product of spheres and each Q factor
// is sent to one primitive factor of M (tori are split into circles) with a
// given mapping degree, or collapsed to a point (target = -1).
struct FactorCycle {
    std::vector<int> qFactorDims;  // dims of the sphere factors of Q
    std::vector<int> target;       // index into the split factor list of M, or -1
    std::vector<int> degree;       // mapping degree per Q factor
    int dim() const;
};

// Splits tori of M into circles: the factor list used by FactorCycle::target.
std::vector<Factor> splitFactors(const ProductTopology& m);

// True iff b_*[Q] != 0 in H_k(M; Z/2).
bool pushforwardNonzero(const ProductTopology& m, const FactorCycle& b);

struct PairingResult {
    bool nonzero = false;
    int degree = 0;  // k
    std::string explanation;
};
// The projection pairing: the split class maps to b1_*[Q1] (x) b2_*[Q2] in
// H_k(M) (x) H_k(M) and is nonzero iff both pushforwards are.
PairingResult projectionPairing(const ProductTopology& m, const FactorCycle& b1, const FactorCycle& b2);

// CSV "degree,dim" rows.
std::string toCsv(const GradedDims& a);
nlohmann::json toJson(const GradedDims& a);
nlohmann::json toJson(const Bound& b);

}  // namespace conormal::algebra
