#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace ladderlab::detail {

struct GaussRule {
    std::vector<double> nodes;   // on [-1, 1]
    std::vector<double> weights;
};

/// Gauss-Legendre rule with `count` nodes; cached per count.
const GaussRule& gauss_legendre(int count);

/// Integrates f over [a, b] with the `count`-point Gauss-Legendre rule.
template <class F>
double integrate_gl(F&& f, double a, double b, int count)
{
    const GaussRule& rule = gauss_legendre(count);
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    double sum = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i)
        sum += rule.weights[i] * f(mid + half * rule.nodes[i]);
    return half * sum;
}

/// Neumaier compensated sum.
class CompensatedSum {
public:
    void add(double v)
    {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v))
            comp_ += (sum_ - t) + v;
        else
            comp_ += (v - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

} // namespace ladderlab::detail
