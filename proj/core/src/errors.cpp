#include "dimcollapse/errors.hpp"

namespace dimcollapse {

DivergenceError::DivergenceError(long step, const std::string& what)
    : Error("diverged at step " + std::to_string(step) + ": " + what), step_(step) {}

}  // namespace dimcollapse
