#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace evcoord {

/// Input failed validation. Carries every problem found, not just the first.
class ValidationError : public std::runtime_error {
public:
  explicit ValidationError(std::vector<std::string> problems)
      : std::runtime_error(join(problems)), problems_(std::move(problems)) {}
  explicit ValidationError(const std::string& problem)
      : ValidationError(std::vector<std::string>{problem}) {}

  const std::vector<std::string>& problems() const { return problems_; }

private:
  static std::string join(const std::vector<std::string>& ps) {
    std::string out;
    for (const auto& p : ps) {
      if (!out.empty()) out += "; ";
      out += p;
    }
    return out.empty() ? std::string("validation failed") : out;
  }
  std::vector<std::string> problems_;
};

/// Query referenced an unknown node, phase, customer or similar.
class InvalidQueryError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Vector/matrix sizes do not line up.
class DimensionError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// EV parameters cannot produce a nonempty feasibility set.
class InfeasibleParamsError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

/// A solve detected an infeasible constraint system.
class InfeasibleProblemError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// An agent has no communication neighbors.
class IsolatedAgentError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// splitmix64; used to derive independent per-role seeds from one scenario seed.
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t role) {
  std::uint64_t z = seed + role * 0x9e3779b97f4a7c15ULL + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace seed_role {
inline constexpr std::uint64_t ev_params = 1;
inline constexpr std::uint64_t comm_graph = 2;
}  // namespace seed_role

}  // namespace evcoord
