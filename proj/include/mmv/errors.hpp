#ifndef MMV_ERRORS_HPP
#define MMV_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace mmv {

struct NonPositiveVolatility : std::runtime_error {
    explicit NonPositiveVolatility(const std::string& what) : std::runtime_error(what) {}
};

struct GridTooCoarse : std::runtime_error {
    explicit GridTooCoarse(const std::string& what) : std::runtime_error(what) {}
};

struct NonPositiveF : std::runtime_error {
    explicit NonPositiveF(const std::string& what) : std::runtime_error(what) {}
};

struct OutOfDomain : std::runtime_error {
    explicit OutOfDomain(const std::string& what) : std::runtime_error(what) {}
};

struct ExcessiveExcursion : std::runtime_error {
    explicit ExcessiveExcursion(const std::string& what) : std::runtime_error(what) {}
};

struct DegenerateER : std::runtime_error {
    explicit DegenerateER(const std::string& what) : std::runtime_error(what) {}
};

struct DegenerateVariance : std::runtime_error {
    explicit DegenerateVariance(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : std::runtime_error {
    std::string field;
    ConfigError(std::string field_, const std::string& what)
        : std::runtime_error("config field '" + field_ + "': " + what), field(std::move(field_)) {}
};

}  // namespace mmv

#endif  // MMV_ERRORS_HPP
