#pragma once

#include <stdexcept>
#include <string>

namespace smanifold {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define SMANIFOLD_ERROR(Name)        \
  struct Name : Error {              \
    using Error::Error;              \
  }

SMANIFOLD_ERROR(DimensionMismatch);
SMANIFOLD_ERROR(InvalidState);
SMANIFOLD_ERROR(SingularityProximity);
SMANIFOLD_ERROR(EigenFailure);
SMANIFOLD_ERROR(DomainViolation);
SMANIFOLD_ERROR(IoError);

// hypotheses
SMANIFOLD_ERROR(NotEquilibrium);

// integrate
SMANIFOLD_ERROR(InvalidInitialDatum);
SMANIFOLD_ERROR(NonPositiveZeta);
SMANIFOLD_ERROR(NotMonotone);

// manifolds
SMANIFOLD_ERROR(NotContraction);
SMANIFOLD_ERROR(TailTruncationDominates);
SMANIFOLD_ERROR(FactorizationResidual);
SMANIFOLD_ERROR(HypothesisViolation);
SMANIFOLD_ERROR(NotOnManifold);
SMANIFOLD_ERROR(DegenerateFit);
SMANIFOLD_ERROR(NoDecay);

// examples
SMANIFOLD_ERROR(OutOfValidity);
SMANIFOLD_ERROR(GroupCollision);

#undef SMANIFOLD_ERROR

struct ParseError : Error {
  ParseError(const std::string& msg, int line, int column, std::string token)
      : Error(msg + " at line " + std::to_string(line) + ", column " + std::to_string(column) +
              (token.empty() ? std::string(" (end of input)") : " near '" + token + "'")),
        line(line),
        column(column),
        token(std::move(token)) {}
  int line;
  int column;
  std::string token;
};

}  // namespace smanifold
