#pragma once

#include <stdexcept>
#include <string>

namespace conormal {

// Pipeline stages, used to tag errors that surface through the CLI.
enum class Stage { Config, Geometry, Chords, MorseFlow, Strops, Algebra, Output };

const char* stageName(Stage s);

class ConormalError : public std::runtime_error {
public:
    ConormalError(Stage stage, const std::string& what)
        : std::runtime_error(what), stage_(stage) {}
    Stage stage() const { return stage_; }
    virtual int exitCode() const { return 1; }

private:
    Stage stage_;
};

// A genericity or transversality hypothesis is violated (degenerate chords,
// non-transversal intersections, failed normalization).  Usually fixed by
// re-seeding the perturbation.
class HypothesisError : public ConormalError {
public:
    using ConormalError::ConormalError;
    int exitCode() const override { return 2; }
};

// The numerics did not deliver (divergence, step collapse, monotonicity).
class NumericalError : public ConormalError {
public:
    using ConormalError::ConormalError;
    int exitCode() const override { return 3; }
};

class ConfigError : public ConormalError {
public:
    explicit ConfigError(const std::string& what) : ConormalError(Stage::Config, what) {}
};

}  // namespace conormal
