#include "quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace ladderlab::detail {

namespace {

GaussRule build_rule(int count)
{
    GaussRule rule;
    rule.nodes.resize(count);
    rule.weights.resize(count);
    for (int i = 0; i < count; ++i) {
        // Newton on P_count starting from the Chebyshev-like guess
        double x = std::cos(std::numbers::pi * (i + 0.75) / (count + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= count; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = count * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        // recompute derivative at the converged node
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= count; ++k) {
            const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = count * (x * p1 - p0) / (x * x - 1.0);
        rule.nodes[count - 1 - i] = x;
        rule.weights[count - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return rule;
}

} // namespace

const GaussRule& gauss_legendre(int count)
{
    static std::mutex mutex;
    static std::map<int, GaussRule> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(count);
    if (it == cache.end()) it = cache.emplace(count, build_rule(count)).first;
    return it->second;
}

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace ladderlab::detail
