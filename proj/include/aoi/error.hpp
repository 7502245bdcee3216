#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace aoi {

/// Base class for every error raised by the library. `kind()` is a stable
/// machine-readable tag used by the CLI error records.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

/// Invalid model or experiment parameter. `field()` names the offending entry.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& what)
        : Error("validation", field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class CapacityError : public Error {
public:
    CapacityError(std::uint64_t requested, std::uint64_t limit)
        : Error("capacity", "state space of " + std::to_string(requested) +
                                " states exceeds limit " + std::to_string(limit)),
          requested_(requested) {}
    std::uint64_t requested() const noexcept { return requested_; }

private:
    std::uint64_t requested_;
};

class InfeasibleActionError : public Error {
public:
    explicit InfeasibleActionError(const std::string& what) : Error("infeasible_action", what) {}
};

class ConvergenceError : public Error {
public:
    ConvergenceError(int iterations, double last_delta)
        : Error("non_convergence", "no convergence after " + std::to_string(iterations) +
                                       " iterations (last delta " + std::to_string(last_delta) + ")"),
          iterations_(iterations),
          last_delta_(last_delta) {}
    int iterations() const noexcept { return iterations_; }
    double last_delta() const noexcept { return last_delta_; }

private:
    int iterations_;
    double last_delta_;
};

/// Raised by the brute-force oracle when an instance is too large to enumerate.
class GuardError : public Error {
public:
    GuardError(const std::string& what, double policy_count)
        : Error("guard", what), policy_count_(policy_count) {}
    double policy_count() const noexcept { return policy_count_; }

private:
    double policy_count_;
};

class KeyMismatchError : public Error {
public:
    explicit KeyMismatchError(std::vector<std::string> missing)
        : Error("key_mismatch", describe(missing)), missing_(std::move(missing)) {}
    const std::vector<std::string>& missing() const noexcept { return missing_; }

private:
    static std::string describe(const std::vector<std::string>& keys) {
        std::string s = "runs do not share grid keys; missing:";
        for (const auto& k : keys) s += " " + k;
        return s;
    }
    std::vector<std::string> missing_;
};

}  // namespace aoi
