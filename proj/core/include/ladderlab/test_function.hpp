#pragma once

#include <memory>
#include <string>
#include <vector>

namespace ladderlab {

/// Even Schwartz function psi whose Fourier transform psi_hat is supported in
/// [-a, a]. Convention: psi_hat(s) = int psi(x) e^{-isx} dx, so
/// psi(x) = (1/pi) int_0^a psi_hat(s) cos(sx) ds and psi_hat(0) = int psi.
class TestFunction {
public:
    enum class Profile { Bump, Autocorrelation };

    /// psi_hat(s) = hat0 * e * exp(-1 / (1 - (s/a)^2)) on |s| < a.
    static TestFunction bump(double a, double hat0 = 1.0);
    /// psi_hat proportional to b * b with b the bump of radius a/2; psi >= 0 and
    /// psi_hat >= 0.
    static TestFunction bump_autocorrelation(double a, double hat0 = 1.0);

    double hat(double s) const;
    double hat0() const;
    double hat_support_radius() const;
    bool nonneg() const;
    Profile profile() const;
    double scale() const { return delta_; }

    double operator()(double x) const;
    double derivative(double x) const;

    /// int_{-inf}^{x} psi
    double cumulative(double x) const;
    /// int_{|y| > r} |psi(y)|, r >= 0
    double tail_mass(double r) const;
    /// Bound on sup_{|y| >= r} |psi(y)|. Inside the sample table this is the
    /// sampled supremum (with a small interpolation margin); beyond it the
    /// fitted polynomial envelope C_p (1 + r)^{-p} with the smallest value over
    /// p in {4, ..., 16}.
    double envelope(double r) const;
    /// Smallest r with envelope(r) <= eps.
    double effective_radius(double eps) const;
    /// C_p with |psi(x)| <= C_p (1 + |x|)^{-p} on the sample table.
    double decay_constant(int p) const;
    /// Largest |x| covered by the sample table.
    double table_range() const;

    /// psi_delta(x) = psi(x / delta) / delta
    TestFunction scaled(double delta) const;

    std::string describe() const;

    struct Table;

private:
    std::shared_ptr<const Table> table_;
    double delta_ = 1.0;
};

/// chi_{C,delta}(x) = int_{-C}^{C} psi_delta(x - y) dy
double mollified_indicator(const TestFunction& psi, double C, double delta, double x);

} // namespace ladderlab
