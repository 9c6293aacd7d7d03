#include "stratsim/domain.hpp"

namespace stratsim {

const char* to_string(Violation::Kind kind) {
  switch (kind) {
    case Violation::Kind::BadLabel: return "BadLabel";
    case Violation::Kind::NonFiniteFeature: return "NonFiniteFeature";
    case Violation::Kind::DimensionMismatch: return "DimensionMismatch";
    case Violation::Kind::NonNegativityViolation: return "NonNegativityViolation";
    case Violation::Kind::NonFiniteEntry: return "NonFiniteEntry";
    case Violation::Kind::EmptyDataset: return "EmptyDataset";
  }
  return "Unknown";
}

}  // namespace stratsim
