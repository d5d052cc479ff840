#pragma once

#include <stdexcept>
#include <string>

namespace twofluid {

// Every library error carries a stable name so the CLI can print it and tests
// can match on it without parsing message text.
class Error : public std::runtime_error {
public:
    Error(std::string name, const std::string& what)
        : std::runtime_error(what), name_(std::move(name)) {}
    const std::string& name() const { return name_; }

private:
    std::string name_;
};

#define TWOFLUID_ERROR(Name)                                        \
    class Name : public Error {                                     \
    public:                                                         \
        explicit Name(const std::string& what) : Error(#Name, what) {} \
    }

TWOFLUID_ERROR(InvalidLaw);
TWOFLUID_ERROR(NoConvergence);
TWOFLUID_ERROR(NonPositiveMass);
TWOFLUID_ERROR(NegativeAlpha4);
TWOFLUID_ERROR(StableParameters);
TWOFLUID_ERROR(OutOfRegime);
TWOFLUID_ERROR(GridMismatch);
TWOFLUID_ERROR(UndefinedAtZero);
TWOFLUID_ERROR(GridTooCoarse);
TWOFLUID_ERROR(StepTooLarge);
TWOFLUID_ERROR(ConfigError);

#undef TWOFLUID_ERROR

} // namespace twofluid
