#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace quadrat {

/// Malformed or inconsistent input: bad files, bad arguments. CLI exit code 1.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A data invariant was violated in the middle of a computation. CLI exit code 2.
class InvariantError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DuplicateSpeciesError : public InputError {
 public:
  explicit DuplicateSpeciesError(std::int64_t species_id)
      : InputError("duplicate species_id " + std::to_string(species_id)),
        species_id_(species_id) {}
  std::int64_t species_id() const noexcept { return species_id_; }

 private:
  std::int64_t species_id_;
};

class UnknownRegionError : public InputError {
 public:
  explicit UnknownRegionError(std::string quadrat_id)
      : InputError("no registered region is a prefix of quadrat_id '" + quadrat_id + "'"),
        quadrat_id_(std::move(quadrat_id)) {}
  const std::string& quadrat_id() const noexcept { return quadrat_id_; }

 private:
  std::string quadrat_id_;
};

}  // namespace quadrat
