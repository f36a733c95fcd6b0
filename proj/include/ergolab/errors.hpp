#pragma once

#include <stdexcept>
#include <string>

namespace ergolab {

// Bad argument values: non-finite entries, missing lags, malformed descriptors.
class input_error : public std::invalid_argument {
public:
    explicit input_error(const std::string& what) : std::invalid_argument(what) {}
};

// A stated precondition failed (e.g. operator not normal, norm bound violated).
class precondition_error : public std::invalid_argument {
public:
    explicit precondition_error(const std::string& what) : std::invalid_argument(what) {}
};

// The (system, observable, quality) combination is not supported.
class capability_error : public std::invalid_argument {
public:
    explicit capability_error(const std::string& what) : std::invalid_argument(what) {}
};

// A requested evaluation did not converge where convergence is required.
class convergence_error : public std::runtime_error {
public:
    explicit convergence_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace ergolab
