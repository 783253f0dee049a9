// Scenario files: a small TOML reader and the typed scenario on top of it.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "conormal/cli.hpp"
#include "conormal/errors.hpp"

namespace conormal::cli {

namespace {

[[noreturn]] void fail(int line, const std::string& what) {
    throw ConfigError("scenario line " + std::to_string(line) + ": " + what);
}

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

// Removes a trailing # comment that is not inside a string.
std::string stripComment(const std::string& s) {
    char quote = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (quote) {
            if (c == '\\' && quote == '"') ++i;
            else if (c == quote) quote = 0;
        } else if (c == '"' || c == '\'') {
            quote = c;
        } else if (c == '#') {
            return s.substr(0, i);
        }
    }
    return s;
}

bool bareKeyChar(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

std::vector<std::string> splitKey(const std::string& raw, int line) {
    std::vector<std::string> parts;
    std::stringstream ss(raw);
    std::string part;
    while (std::getline(ss, part, '.')) {
        part = trim(part);
        if (part.size() >= 2 && part.front() == '"' && part.back() == '"') part = part.substr(1, part.size() - 2);
        else if (part.empty() || !std::all_of(part.begin(), part.end(), bareKeyChar)) fail(line, "bad key '" + raw + "'");
        parts.push_back(part);
    }
    if (parts.empty()) fail(line, "empty key");
    return parts;
}

class ValueParser {
public:
    ValueParser(const std::string& s, int line) : s_(s), line_(line) {}

    nlohmann::json parse() {
        auto v = value();
        skipSpace();
        if (pos_ != s_.size()) fail(line_, "trailing characters after value");
        return v;
    }

private:
    void skipSpace() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    nlohmann::json value() {
        skipSpace();
        if (pos_ >= s_.size()) fail(line_, "missing value");
        const char c = s_[pos_];
        if (c == '"') return basicString();
        if (c == '\'') return literalString();
        if (c == '[') return array();
        if (s_.compare(pos_, 4, "true") == 0) {
            pos_ += 4;
            return true;
        }
        if (s_.compare(pos_, 5, "false") == 0) {
            pos_ += 5;
            return false;
        }
        return number();
    }

    nlohmann::json basicString() {
        std::string out;
        ++pos_;
        while (pos_ < s_.size() && s_[pos_] != '"') {
            char c = s_[pos_++];
            if (c == '\\') {
                if (pos_ >= s_.size()) break;
                const char e = s_[pos_++];
                switch (e) {
                    case 'n': c = '\n'; break;
                    case 't': c = '\t'; break;
                    case '"': c = '"'; break;
                    case '\\': c = '\\'; break;
                    default: fail(line_, std::string("unsupported escape \\") + e);
                }
            }
            out.push_back(c);
        }
        if (pos_ >= s_.size()) fail(line_, "unterminated string");
        ++pos_;
        return out;
    }

    nlohmann::json literalString() {
        const auto end = s_.find('\'', pos_ + 1);
        if (end == std::string::npos) fail(line_, "unterminated string");
        std::string out = s_.substr(pos_ + 1, end - pos_ - 1);
        pos_ = end + 1;
        return out;
    }

    nlohmann::json array() {
        nlohmann::json out = nlohmann::json::array();
        ++pos_;
        while (true) {
            skipSpace();
            if (pos_ >= s_.size()) fail(line_, "unterminated array");
            if (s_[pos_] == ']') {
                ++pos_;
                return out;
            }
            out.push_back(value());
            skipSpace();
            if (pos_ < s_.size() && s_[pos_] == ',') ++pos_;
            else if (pos_ < s_.size() && s_[pos_] != ']') fail(line_, "expected ',' or ']' in array");
        }
    }

    nlohmann::json number() {
        const std::size_t start = pos_;
        while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '+' ||
                                    s_[pos_] == '-' || s_[pos_] == '.' || s_[pos_] == '_'))
            ++pos_;
        std::string tok;
        for (std::size_t i = start; i < pos_; ++i)
            if (s_[i] != '_') tok.push_back(s_[i]);
        if (tok.empty()) fail(line_, "unrecognized value");
        const bool isFloat = tok.find_first_of(".eE") != std::string::npos;
        try {
            std::size_t used = 0;
            if (isFloat) {
                const double v = std::stod(tok, &used);
                if (used == tok.size()) return v;
            } else {
                const long long v = std::stoll(tok, &used);
                if (used == tok.size()) return v;
            }
        } catch (const std::exception&) {
        }
        fail(line_, "unrecognized value '" + tok + "'");
    }

    const std::string& s_;
    int line_;
    std::size_t pos_ = 0;
};

nlohmann::json& descend(nlohmann::json& root, const std::vector<std::string>& path, int line) {
    nlohmann::json* cur = &root;
    for (const auto& p : path) {
        if (!cur->contains(p)) (*cur)[p] = nlohmann::json::object();
        cur = &(*cur)[p];
        if (!cur->is_object()) fail(line, "key '" + p + "' is not a table");
    }
    return *cur;
}

int bracketBalance(const std::string& s) {
    int depth = 0;
    char quote = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (quote) {
            if (c == '\\' && quote == '"') ++i;
            else if (c == quote) quote = 0;
        } else if (c == '"' || c == '\'') {
            quote = c;
        } else if (c == '[') {
            ++depth;
        } else if (c == ']') {
            --depth;
        }
    }
    return depth;
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("scenario key '") + key + "' has the wrong type");
    }
}

void rejectUnknown(const nlohmann::json& j, const std::string& where, std::initializer_list<const char*> keys) {
    for (const auto& [k, v] : j.items()) {
        bool known = false;
        for (const char* x : keys) known = known || k == x;
        if (!known) throw ConfigError("unknown key '" + k + "' in " + where);
    }
}

}  // namespace

nlohmann::json parseToml(const std::string& text) {
    nlohmann::json root = nlohmann::json::object();
    nlohmann::json* table = &root;
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string s = trim(stripComment(raw));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.size() < 3 || s.back() != ']' || s[1] == '[') fail(line, "bad table header");
            table = &descend(root, splitKey(s.substr(1, s.size() - 2), line), line);
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) fail(line, "expected key = value");
        const auto key = splitKey(s.substr(0, eq), line);
        std::string val = trim(s.substr(eq + 1));
        const int startLine = line;
        // Arrays may continue over several lines.
        while (bracketBalance(val) > 0 && std::getline(in, raw)) {
            ++line;
            val += " " + trim(stripComment(raw));
        }
        nlohmann::json& owner =
            descend(*table, std::vector<std::string>(key.begin(), key.end() - 1), startLine);
        if (owner.contains(key.back())) fail(startLine, "duplicate key '" + key.back() + "'");
        owner[key.back()] = ValueParser(val, startLine).parse();
    }
    return root;
}

// --------------------------------------------------------------- Tolerances

Tolerances Tolerances::fromJson(const nlohmann::json& j) {
    Tolerances t;
    rejectUnknown(j, "[tolerances]",
                  {"chord_residual", "chord_dedup", "null_band", "locus_residual", "h_floor", "position",
                   "k0_clearance", "tau0_margin", "jitter"});
    read(j, "chord_residual", t.chordResidual);
    read(j, "chord_dedup", t.chordDedup);
    read(j, "null_band", t.nullBand);
    read(j, "locus_residual", t.locusResidual);
    read(j, "h_floor", t.hFloor);
    read(j, "position", t.position);
    read(j, "k0_clearance", t.k0Clearance);
    read(j, "tau0_margin", t.tau0Margin);
    read(j, "jitter", t.jitter);
    for (double v : {t.chordResidual, t.chordDedup, t.nullBand, t.locusResidual, t.hFloor, t.position,
                     t.k0Clearance, t.tau0Margin, t.jitter})
        if (!(v > 0.0)) throw ConfigError("tolerances must be positive");
    if (t.tau0Margin >= 1.0) throw ConfigError("tau0_margin must lie in (0, 1)");
    return t;
}

nlohmann::json Tolerances::toJson() const {
    return {{"chord_residual", chordResidual}, {"chord_dedup", chordDedup}, {"null_band", nullBand},
            {"locus_residual", locusResidual}, {"h_floor", hFloor},         {"position", position},
            {"k0_clearance", k0Clearance},     {"tau0_margin", tau0Margin}, {"jitter", jitter}};
}

// ----------------------------------------------------------------- Scenario

Scenario Scenario::fromJson(const nlohmann::json& j) {
    Scenario s;
    rejectUnknown(j, "scenario",
                  {"name", "seed", "route", "lch", "manifold", "perturbation", "metric", "solver", "output",
                   "tolerances"});
    read(j, "name", s.name);
    read(j, "seed", s.seed);
    read(j, "route", s.route);
    read(j, "lch", s.lch);
    if (j.contains("manifold")) {
        const auto& m = j.at("manifold");
        if (!m.is_object()) throw ConfigError("[manifold] must be a table");
        read(m, "kind", s.manifold);
        for (const auto& [k, v] : m.items()) {
            if (k == "kind") continue;
            if (!v.is_number()) throw ConfigError("manifold parameter '" + k + "' must be a number");
            s.params[k] = v.get<double>();
        }
    }
    if (j.contains("perturbation")) {
        const auto& p = j.at("perturbation");
        rejectUnknown(p, "[perturbation]", {"kind", "seed", "amplitude", "modes", "wavenumber"});
        read(p, "kind", s.perturbation.kind);
        read(p, "seed", s.perturbation.seed);
        read(p, "amplitude", s.perturbation.amplitude);
        read(p, "modes", s.perturbation.modes);
        read(p, "wavenumber", s.perturbation.wavenumber);
    }
    if (j.contains("metric")) {
        const auto& m = j.at("metric");
        rejectUnknown(m, "[metric]", {"g_seed", "gp_seed", "amplitude", "bumps"});
        read(m, "g_seed", s.metric.gSeed);
        read(m, "gp_seed", s.metric.gpSeed);
        read(m, "amplitude", s.metric.amplitude);
        read(m, "bumps", s.metric.bumps);
    }
    if (j.contains("solver")) {
        rejectUnknown(j.at("solver"), "[solver]", {"grid_per_dim"});
        read(j.at("solver"), "grid_per_dim", s.gridPerDim);
    }
    if (j.contains("output")) {
        rejectUnknown(j.at("output"), "[output]", {"dir", "svg"});
        read(j.at("output"), "dir", s.outDir);
        read(j.at("output"), "svg", s.svg);
    }
    if (j.contains("tolerances")) s.tol = Tolerances::fromJson(j.at("tolerances"));

    static const char* kinds[] = {"circle", "hopf", "ellipsoid", "torus", "sphere", "trefoil", "k0", "k1"};
    if (std::none_of(std::begin(kinds), std::end(kinds), [&](const char* k) { return s.manifold == k; }))
        throw ConfigError("unknown manifold kind '" + s.manifold + "'");
    if (s.route != "morse" && s.route != "geometric" && s.route != "algebra")
        throw ConfigError("route must be morse, geometric or algebra");
    if (s.perturbation.kind != "none" && s.perturbation.kind != "fourier")
        throw ConfigError("perturbation kind must be none or fourier");
    if (s.perturbation.amplitude < 0.0 || s.perturbation.modes < 1)
        throw ConfigError("perturbation needs amplitude >= 0 and modes >= 1");
    if (s.metric.amplitude < 0.0 || s.metric.bumps < 0) throw ConfigError("metric bumps must be nonnegative");
    return s;
}

Scenario Scenario::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open scenario file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return fromJson(parseToml(ss.str()));
}

nlohmann::json Scenario::toJson() const {
    nlohmann::json m = {{"kind", manifold}};
    for (const auto& [k, v] : params) m[k] = v;
    return {{"name", name},
            {"seed", seed},
            {"route", route},
            {"lch", lch},
            {"manifold", m},
            {"perturbation",
             {{"kind", perturbation.kind},
              {"seed", perturbation.seed},
              {"amplitude", perturbation.amplitude},
              {"modes", perturbation.modes},
              {"wavenumber", perturbation.wavenumber}}},
            {"metric",
             {{"g_seed", metric.gSeed},
              {"gp_seed", metric.gpSeed},
              {"amplitude", metric.amplitude},
              {"bumps", metric.bumps}}},
            {"solver", {{"grid_per_dim", gridPerDim}}},
            {"tolerances", tol.toJson()}};
}

std::string Scenario::hash() const {
    const std::string text = toJson().dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace conormal::cli
