#pragma once

#include <stdexcept>
#include <string>

namespace hotvae {

// Thrown when tensor shapes are incompatible with an operation.
class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a value is outside its valid domain (bad hyperparameter,
// label entry not in {0,1}, empty neighborhood in softmax, ...).
class ValueError : public std::runtime_error {
public:
    explicit ValueError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when an input file (ARFF, CSV, split index, config, checkpoint)
// cannot be parsed.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a computation produces a non-finite value.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a requested metric cannot be computed for the given inputs
// (e.g. AUC with single-class ground truth on every label).
class MetricUnavailable : public std::runtime_error {
public:
    explicit MetricUnavailable(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace hotvae
