#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace noisy_mdp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input matrix or vector failed a stochasticity / shape check.
class ValidationError : public Error {
public:
    using Error::Error;
};

class ReducibleChain : public Error {
public:
    using Error::Error;
};

/// Observation symbol j has zero marginal probability, so row j of Q is undefined.
class UnreachableObservation : public Error {
public:
    explicit UnreachableObservation(std::size_t symbol)
        : Error("observation " + std::to_string(symbol) + " has zero marginal probability"),
          symbol_(symbol) {}
    std::size_t symbol() const noexcept { return symbol_; }

private:
    std::size_t symbol_;
};

/// The two-state conic system carries no information (all coefficients vanish).
class Underdetermined : public Error {
public:
    using Error::Error;
};

/// Per-action solution sets share no common point.
class NoConsistentSolution : public Error {
public:
    using Error::Error;
};

/// An observation has zero likelihood under every positively weighted support point.
class InconsistentObservation : public Error {
public:
    using Error::Error;
};

/// Optimizer could not produce a single usable local minimum.
class NoConvergence : public Error {
public:
    using Error::Error;
};

/// Identifiability condition failed and the caller asked to abort.
class IdentifiabilityFailure : public Error {
public:
    using Error::Error;
};

}  // namespace noisy_mdp
