#include "sdobs/saturation.hpp"

namespace sdobs {

double saturation_q(double s) {
    if (s <= 1.0) return 1.0;
    return 2.0 / s - 1.0 / (s * s);
}

double saturation_q_derivative(double s) {
    if (s <= 1.0) return 0.0;
    return -2.0 / (s * s) + 2.0 / (s * s * s);
}

}  // namespace sdobs
