#ifndef INCAP_ERRORS_HPP
#define INCAP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace incap {

// Error taxonomy shared by the library and the CLI; each class maps to a
// distinct process exit code (see tools/).
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : Error {
  using Error::Error;
};

struct NotIrreducible : Error {
  using Error::Error;
};

struct NotReversible : Error {
  using Error::Error;
};

struct SpaceTooLarge : Error {
  SpaceTooLarge(std::string msg, unsigned long long cardinality)
      : Error(std::move(msg)), cardinality(cardinality) {}
  unsigned long long cardinality;
};

struct AssumptionViolated : Error {
  using Error::Error;
};

struct BadLambda : Error {
  using Error::Error;
};

struct Diverged : Error {
  using Error::Error;
};

struct NotAFlow : Error {
  NotAFlow(std::string msg, long long vertex) : Error(std::move(msg)), worst_vertex(vertex) {}
  long long worst_vertex;
};

struct SingularSystem : Error {
  using Error::Error;
};

struct EventCapExceeded : Error {
  using Error::Error;
};

}  // namespace incap

#endif
