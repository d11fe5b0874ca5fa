#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fracdiff {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define FRACDIFF_DECLARE_ERROR(Name)          \
    class Name : public Error {               \
    public:                                   \
        using Error::Error;                   \
    }

// mittag_leffler
FRACDIFF_DECLARE_ERROR(NonConvergence);
FRACDIFF_DECLARE_ERROR(RegimeError);
FRACDIFF_DECLARE_ERROR(UnsupportedRegime);
FRACDIFF_DECLARE_ERROR(BadGrid);

// spectral_operator
FRACDIFF_DECLARE_ERROR(EllipticityViolated);
FRACDIFF_DECLARE_ERROR(SignViolated);
FRACDIFF_DECLARE_ERROR(ConvergenceFailure);
FRACDIFF_DECLARE_ERROR(QuadratureNotConverged);

// forward_solver
FRACDIFF_DECLARE_ERROR(TruncationFailure);

// order_recovery
FRACDIFF_DECLARE_ERROR(WindowTooNoisy);
FRACDIFF_DECLARE_ERROR(SignChange);
FRACDIFF_DECLARE_ERROR(IllConditioned);
FRACDIFF_DECLARE_ERROR(StartOutOfBox);

// shared
FRACDIFF_DECLARE_ERROR(PreconditionViolation);
FRACDIFF_DECLARE_ERROR(ConfigError);
FRACDIFF_DECLARE_ERROR(ParseError);

#undef FRACDIFF_DECLARE_ERROR

/// Raised by the beta root search. `flat()` distinguishes a misfit that does
/// not depend on beta at all from one that simply has no zero in (0,1).
class NoRoot : public Error {
public:
    NoRoot(const std::string& what, bool flat) : Error(what), flat_(flat) {}
    bool flat() const noexcept { return flat_; }

private:
    bool flat_;
};

/// Several beta values explain the moments equally well; ranked best first.
class Ambiguous : public Error {
public:
    Ambiguous(const std::string& what, std::vector<double> candidates)
        : Error(what), candidates_(std::move(candidates))
    {
    }
    const std::vector<double>& candidates() const noexcept { return candidates_; }

private:
    std::vector<double> candidates_;
};

/// Optimiser budget exhausted; carries the best point seen.
class MaxIterations : public Error {
public:
    MaxIterations(const std::string& what, std::vector<double> best, double value)
        : Error(what), best_(std::move(best)), value_(value)
    {
    }
    const std::vector<double>& best() const noexcept { return best_; }
    double value() const noexcept { return value_; }

private:
    std::vector<double> best_;
    double value_;
};

} // namespace fracdiff
