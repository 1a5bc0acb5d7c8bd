#pragma once

#include <cmath>

namespace lpfdr {

// Neumaier-compensated summation; keeps reductions reproducible to the last bit
// for a fixed input order.
struct KahanAccumulator {
    double sum = 0.0;
    double comp = 0.0;

    void add(double x) {
        const double t = sum + x;
        if (std::fabs(sum) >= std::fabs(x)) {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }

    double total() const { return sum + comp; }
};

}  // namespace lpfdr
