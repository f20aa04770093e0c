#ifndef GRIDCAST_ERRORS_HPP
#define GRIDCAST_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace gridcast {

// Base class for all library errors.  The category steers the process
// exit code: data errors (malformed input, unknown station, bad grid)
// exit with 2, numerical errors (singular systems, failed fits) with 3.
class Error : public std::runtime_error {
public:
    enum class Category { data, numerical, usage };

    Error(Category cat, const std::string& msg)
        : std::runtime_error(msg), category_(cat) {}

    Category category() const noexcept { return category_; }

private:
    Category category_;
};

// Malformed or inconsistent input data (CSV syntax, bad header, grid
// magic mismatch, station referenced but not declared, ...).
class DataError : public Error {
public:
    explicit DataError(const std::string& msg)
        : Error(Category::data, msg) {}
};

// Numerical failure: singular kriging system, non-convergent fit,
// degenerate data handed to an estimator.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& msg)
        : Error(Category::numerical, msg) {}
};

// Invalid argument values at an API boundary (bad parameter ranges,
// quantile level outside (0,1), negative wind speed).
class InvalidArgument : public Error {
public:
    explicit InvalidArgument(const std::string& msg)
        : Error(Category::usage, msg) {}
};

} // namespace gridcast

#endif
