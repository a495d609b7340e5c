#pragma once

#include <array>
#include <cstddef>
#include <string_view>
#include <vector>

#include "fwdpca/curves.hpp"
#include "fwdpca/rng.hpp"

namespace fwdpca {

// ---------------------------------------------------------------------------
// Gaussian HJM (Musiela parameterization)
// ---------------------------------------------------------------------------

/// A function of time-to-maturity: one of the parametric shapes, or a sampled
/// curve interpolated linearly and held flat past its ends. Simulations refuse
/// sampled inputs that do not cover the maturities they need.
class MaturityFunction {
public:
    enum class Shape { constant, exponential, hump, sampled };

    static MaturityFunction constant(double level);
    /// scale * exp(-decay * x)
    static MaturityFunction exponential(double scale, double decay);
    /// scale * x * exp(-decay * x)
    static MaturityFunction hump(double scale, double decay);
    static MaturityFunction sampled(std::vector<double> maturities, std::vector<double> values);

    double operator()(double x) const;

    /// Largest maturity at which the function is defined.
    double max_maturity() const;

    Shape shape() const noexcept { return shape_; }
    double scale() const noexcept { return scale_; }
    double decay() const noexcept { return decay_; }
    const std::vector<double>& maturities() const noexcept { return xs_; }
    const std::vector<double>& values() const noexcept { return ys_; }

private:
    Shape shape_ = Shape::constant;
    double scale_ = 0.0;
    double decay_ = 0.0;
    std::vector<double> xs_;
    std::vector<double> ys_;
};

std::string_view to_string(MaturityFunction::Shape shape);

struct HjmVolSpec {
    std::vector<MaturityFunction> factors;
    MaturityFunction initial_curve = MaturityFunction::constant(0.05);

    /// Level 0.010, slope 0.030 e^{-2.1x}, curvature 0.060 x e^{-1.25x}; flat 5% start.
    static HjmVolSpec default_three_factor();

    void validate() const;
};

struct HjmSimulationOptions {
    /// Internal maturity step. Zero means "use dt", which makes the transport
    /// step an exact shift by one node.
    double fine_step = 0.0;
};

/// Euler-Maruyama in the Musiela parameterization on an internal uniform grid:
///   r_{t+dt}(x) = r_t(x + dt) + alpha(x) dt + sum_j sigma_j(x) sqrt(dt) Z_j
/// with alpha(x) = sum_j sigma_j(x) int_0^x sigma_j, and the shifted curve
/// taken by linear interpolation. Returns `observations` rows at t = 0, dt, ...
CurvePanel simulate_gaussian_hjm(const HjmVolSpec& spec, std::size_t observations, double dt,
                                 const MaturityGrid& grid, Rng& rng, HjmSimulationOptions options = {});

/// Risk-neutral drift for deterministic volatility, trapezoidal quadrature on
/// a uniform grid with step h, evaluated at x_i = i h for i < count.
std::vector<double> hjm_drift(const HjmVolSpec& spec, double h, std::size_t count);

// ---------------------------------------------------------------------------
// Three-factor CIR
// ---------------------------------------------------------------------------

struct Cir3Params {
    std::array<double, 3> kappa{};
    std::array<double, 3> theta{};
    std::array<double, 3> sigma{};
    std::array<double, 3> y0{};

    /// kappa (0.075, 1.55, 11.5), theta (0.011, 0.015, 0.034), sigma (0.025, 0.19, 0.80),
    /// y0 = theta. Every factor satisfies the Feller condition.
    static Cir3Params defaults();

    void validate() const;
    /// 2 kappa theta > sigma^2 for every factor.
    bool feller() const;
};

/// Single-factor CIR affine coefficients: P(x) = A(x) exp(-B(x) Y).
struct CirAffine {
    double log_a;
    double b;
    double dlog_a;  // d/dx log A
    double db;      // d/dx B
};

CirAffine cir_affine(double kappa, double theta, double sigma, double x);

double cir3_bond_price(const Cir3Params& params, const std::array<double, 3>& factors, double x);

struct Cir3Simulation {
    Matrix factors;  // observations x 3, the floored (nonnegative) state
    CurvePanel prices;
    CurvePanel yields;
    CurvePanel forwards;  // analytic d/dx of the affine exponent
};

/// Full-truncation Euler for each factor; prices from the affine formulas.
Cir3Simulation simulate_cir3(const Cir3Params& params, std::size_t observations, double dt,
                             const MaturityGrid& grid, Rng& rng);

// ---------------------------------------------------------------------------
// Two-factor additive Gaussian (g2++)
// ---------------------------------------------------------------------------

struct G2ppParams {
    double kappa1 = 0.8;
    double kappa2 = 0.7;
    double vol1 = 0.1;
    double vol2 = 0.1;
    double rho = -0.3;
    double flat_rate = 0.05;

    /// kappa = (.8, .7), vol = (.1, .1), rho = -.3
    static G2ppParams set1();
    /// kappa = (.9, .85), vol = (.1, .2), rho = -.3
    static G2ppParams set2();

    void validate() const;
};

enum class VolForm { standard, paper };

std::string_view to_string(VolForm form);
VolForm vol_form_from_string(std::string_view text);

/// Forward-rate volatility at time-to-maturity tau. `standard` uses
/// exp(-2 kappa_i tau) under the squared terms, `paper` the literal
/// exp(-kappa_i tau).
double g2pp_forward_vol(const G2ppParams& params, double tau, VolForm form = VolForm::standard);

/// Initial discount curve (flat).
double g2pp_discount(const G2ppParams& params, double maturity);

/// P(t, t + x) given the factor state (x1, x2) at time t.
double g2pp_bond_price(const G2ppParams& params, double t, double x, double x1, double x2);

/// Instantaneous forward f(t, t + x).
double g2pp_forward_rate(const G2ppParams& params, double t, double x, double x1, double x2);

/// Deterministic shift phi(t) so that r = x1 + x2 + phi fits the flat curve.
double g2pp_shift(const G2ppParams& params, double t);

struct G2ppSimulation {
    Matrix factors;  // observations x 2
    CurvePanel prices;
    CurvePanel yields;
    CurvePanel forwards;
};

/// Exact Gaussian transitions for the two Ornstein-Uhlenbeck factors.
G2ppSimulation simulate_g2pp(const G2ppParams& params, std::size_t observations, double dt,
                             const MaturityGrid& grid, Rng& rng);

/// Variance of log P(T0, T).
double g2pp_integrated_variance(const G2ppParams& params, double expiry, double maturity);

struct OptionSpec {
    double expiry;    // T0
    double maturity;  // T
    double strike;    // K

    void validate() const;
};

/// Call on a zero-coupon bond in a Gaussian model:
///   P(0,T) N(d+) - K P(0,T0) N(d-),  d+- = [ln(P(0,T) / (K P(0,T0))) +- v/2] / sqrt(v).
/// v <= 0 returns the intrinsic value.
double gaussian_bond_call(double discount_maturity, double discount_expiry, double strike, double variance);

double g2pp_option_price(const G2ppParams& params, const OptionSpec& option);

double normal_cdf(double x);

}  // namespace fwdpca
