#ifndef SDR_ERROR_HPP
#define SDR_ERROR_HPP

#include <stdexcept>
#include <string>

namespace sdr {

/// Malformed input text. Carries the 1-based line and the offending field.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& field,
               const std::string& what)
        : std::runtime_error(source + ":" + std::to_string(line) + ": field '" + field +
                             "': " + what),
          line_(line), field_(field) {}

    std::size_t line() const noexcept { return line_; }
    const std::string& field() const noexcept { return field_; }

private:
    std::size_t line_;
    std::string field_;
};

/// Well-formed input that violates a domain invariant.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad data handed to an operation at run time (unbalanced injections,
/// dimension mismatches, empty acceptable regions, ...).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical solver could not finish (iteration limit, singular basis).
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace sdr

#endif
