#pragma once

namespace sdobs {

/// C¹ saturation factor: 1 for s ≤ 1, 2/s − 1/s² above. s·q(s) ≤ 2.
double saturation_q(double s);
double saturation_q_derivative(double s);

}  // namespace sdobs
