#include "pacfl/errors.hpp"

namespace pacfl {

void require(bool condition, const std::string& message) {
  if (!condition) throw PreconditionError(message);
}

}  // namespace pacfl
