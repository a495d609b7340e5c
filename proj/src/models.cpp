#include "fwdpca/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fwdpca/errors.hpp"

namespace fwdpca {

namespace {

// Linear interpolation on a uniform grid with step h, nodes 0..count-1.
double lerp_uniform(const std::vector<double>& values, double h, std::size_t count, double x) {
    const double pos = x / h;
    auto j = static_cast<std::size_t>(std::floor(pos + 1e-9));
    if (j >= count - 1) return values[count - 1];
    const double w = pos - static_cast<double>(j);
    if (w <= 1e-9) return values[j];
    return (1.0 - w) * values[j] + w * values[j + 1];
}

bool all_finite(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

// ---------------------------------------------------------------------------
// MaturityFunction

MaturityFunction MaturityFunction::constant(double level) {
    MaturityFunction f;
    f.shape_ = Shape::constant;
    f.scale_ = level;
    return f;
}

MaturityFunction MaturityFunction::exponential(double scale, double decay) {
    MaturityFunction f;
    f.shape_ = Shape::exponential;
    f.scale_ = scale;
    f.decay_ = decay;
    return f;
}

MaturityFunction MaturityFunction::hump(double scale, double decay) {
    MaturityFunction f;
    f.shape_ = Shape::hump;
    f.scale_ = scale;
    f.decay_ = decay;
    return f;
}

MaturityFunction MaturityFunction::sampled(std::vector<double> maturities, std::vector<double> values) {
    if (maturities.size() != values.size() || maturities.size() < 2) {
        throw DataError("sampled maturity function needs matching maturities/values with at least two points");
    }
    for (std::size_t i = 1; i < maturities.size(); ++i) {
        if (!(maturities[i] > maturities[i - 1])) {
            throw DataError("sampled maturity function: maturities must be strictly increasing");
        }
    }
    if (maturities.front() < 0.0) throw DataError("sampled maturity function: negative maturity");
    MaturityFunction f;
    f.shape_ = Shape::sampled;
    f.xs_ = std::move(maturities);
    f.ys_ = std::move(values);
    return f;
}

double MaturityFunction::operator()(double x) const {
    switch (shape_) {
        case Shape::constant: return scale_;
        case Shape::exponential: return scale_ * std::exp(-decay_ * x);
        case Shape::hump: return scale_ * x * std::exp(-decay_ * x);
        case Shape::sampled: {
            if (x <= xs_.front()) return ys_.front();
            if (x >= xs_.back()) return ys_.back();
            const auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
            const auto i = static_cast<std::size_t>(it - xs_.begin());
            const double w = (x - xs_[i - 1]) / (xs_[i] - xs_[i - 1]);
            return (1.0 - w) * ys_[i - 1] + w * ys_[i];
        }
    }
    return 0.0;
}

double MaturityFunction::max_maturity() const {
    return shape_ == Shape::sampled ? xs_.back() : std::numeric_limits<double>::infinity();
}

std::string_view to_string(MaturityFunction::Shape shape) {
    switch (shape) {
        case MaturityFunction::Shape::constant: return "constant";
        case MaturityFunction::Shape::exponential: return "exponential";
        case MaturityFunction::Shape::hump: return "hump";
        case MaturityFunction::Shape::sampled: return "sampled";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// HJM

HjmVolSpec HjmVolSpec::default_three_factor() {
    HjmVolSpec spec;
    spec.factors = {MaturityFunction::constant(0.010), MaturityFunction::exponential(0.030, 2.1),
                    MaturityFunction::hump(0.060, 1.25)};
    spec.initial_curve = MaturityFunction::constant(0.05);
    return spec;
}

void HjmVolSpec::validate() const {
    if (factors.empty()) throw DataError("HJM volatility needs at least one factor");
    auto check = [](const MaturityFunction& f, const char* what) {
        if (f.shape() == MaturityFunction::Shape::sampled) {
            if (!all_finite(f.values())) throw DataError(std::string(what) + " has non-finite samples");
        } else if (!std::isfinite(f.scale()) || !std::isfinite(f.decay())) {
            throw DataError(std::string(what) + " has non-finite parameters");
        }
    };
    for (const auto& f : factors) check(f, "HJM volatility factor");
    check(initial_curve, "HJM initial curve");
}

std::vector<double> hjm_drift(const HjmVolSpec& spec, double h, std::size_t count) {
    std::vector<double> alpha(count, 0.0);
    for (const auto& sigma : spec.factors) {
        double integral = 0.0;
        double prev = sigma(0.0);
        alpha[0] += prev * integral;
        for (std::size_t i = 1; i < count; ++i) {
            const double cur = sigma(static_cast<double>(i) * h);
            integral += 0.5 * h * (prev + cur);
            alpha[i] += cur * integral;
            prev = cur;
        }
    }
    return alpha;
}

CurvePanel simulate_gaussian_hjm(const HjmVolSpec& spec, std::size_t observations, double dt,
                                 const MaturityGrid& grid, Rng& rng, HjmSimulationOptions options) {
    spec.validate();
    if (!(dt > 0.0)) throw DataError("simulate_gaussian_hjm: dt must be positive");
    if (observations < 1) throw DataError("simulate_gaussian_hjm: need at least one observation");
    const double h = options.fine_step > 0.0 ? options.fine_step : dt;

    const double horizon = static_cast<double>(observations - 1) * dt;
    const double reach = grid.back() + horizon;
    const auto nodes = static_cast<std::size_t>(std::ceil(reach / h - 1e-9)) + 2;
    const double span = static_cast<double>(nodes - 1) * h;
    if (spec.initial_curve.max_maturity() < span) {
        throw DataError("simulate_gaussian_hjm: insufficient maturity headroom, initial curve must cover " +
                        std::to_string(span) + " years");
    }
    for (const auto& sigma : spec.factors) {
        if (sigma.max_maturity() < reach) {
            throw DataError("simulate_gaussian_hjm: insufficient maturity headroom, volatility must cover " +
                            std::to_string(reach) + " years");
        }
    }

    const std::size_t d = spec.factors.size();
    std::vector<std::vector<double>> sigma(d, std::vector<double>(nodes));
    for (std::size_t j = 0; j < d; ++j)
        for (std::size_t i = 0; i < nodes; ++i) sigma[j][i] = spec.factors[j](static_cast<double>(i) * h);
    const std::vector<double> alpha = hjm_drift(spec, h, nodes);

    std::vector<double> curve(nodes);
    for (std::size_t i = 0; i < nodes; ++i) curve[i] = spec.initial_curve(static_cast<double>(i) * h);
    std::vector<double> next(nodes);
    std::vector<double> shocks(d);
    std::size_t valid = nodes;

    const double shift = dt / h;
    const double rounded = std::round(shift);
    const bool exact_shift = std::abs(shift - rounded) < 1e-9;
    const auto int_shift = static_cast<std::size_t>(rounded);
    const double sqrt_dt = std::sqrt(dt);

    Matrix out(static_cast<Eigen::Index>(observations), static_cast<Eigen::Index>(grid.size()));
    auto record = [&](std::size_t row) {
        for (std::size_t k = 0; k < grid.size(); ++k) {
            out(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(k)) = lerp_uniform(curve, h, valid, grid[k]);
        }
    };
    record(0);

    for (std::size_t step = 1; step < observations; ++step) {
        for (std::size_t j = 0; j < d; ++j) shocks[j] = rng.normal() * sqrt_dt;
        // nodes whose shifted position still lands on valid data
        const double last_valid = static_cast<double>(valid - 1);
        const auto new_valid = static_cast<std::size_t>(std::floor(last_valid - shift + 1e-9)) + 1;
        for (std::size_t i = 0; i < new_valid; ++i) {
            double transported;
            if (exact_shift) {
                transported = curve[i + int_shift];
            } else {
                transported = lerp_uniform(curve, h, valid, static_cast<double>(i) * h + dt);
            }
            double value = transported + alpha[i] * dt;
            for (std::size_t j = 0; j < d; ++j) value += sigma[j][i] * shocks[j];
            next[i] = value;
        }
        valid = new_valid;
        std::swap(curve, next);
        record(step);
    }
    return CurvePanel(grid, std::move(out), CurveKind::forward, Transform::level, dt);
}

// ---------------------------------------------------------------------------
// CIR

Cir3Params Cir3Params::defaults() {
    Cir3Params p;
    p.kappa = {0.075, 1.55, 11.5};
    p.theta = {0.011, 0.015, 0.034};
    p.sigma = {0.025, 0.19, 0.80};
    p.y0 = p.theta;
    return p;
}

void Cir3Params::validate() const {
    for (std::size_t i = 0; i < 3; ++i) {
        if (!(kappa[i] > 0.0) || !(theta[i] > 0.0) || !(sigma[i] >= 0.0) || !(y0[i] >= 0.0)) {
            throw DataError("CIR factor " + std::to_string(i + 1) +
                            ": need kappa > 0, theta > 0, sigma >= 0, y0 >= 0");
        }
    }
}

bool Cir3Params::feller() const {
    for (std::size_t i = 0; i < 3; ++i)
        if (!(2.0 * kappa[i] * theta[i] > sigma[i] * sigma[i])) return false;
    return true;
}

CirAffine cir_affine(double kappa, double theta, double sigma, double x) {
    if (sigma < 1e-12) {
        const double e = std::exp(-kappa * x);
        const double b = (1.0 - e) / kappa;
        return {-theta * (x - b), b, -theta * (1.0 - e), e};
    }
    const double s2 = sigma * sigma;
    const double h = std::sqrt(kappa * kappa + 2.0 * s2);
    const double ehx = std::exp(h * x);
    const double em1 = std::expm1(h * x);
    const double den = 2.0 * h + (kappa + h) * em1;
    const double power = 2.0 * kappa * theta / s2;
    const double log_a = power * (std::log(2.0 * h) + 0.5 * (kappa + h) * x - std::log(den));
    const double b = 2.0 * em1 / den;
    const double db = 4.0 * h * h * ehx / (den * den);
    const double dlog_a = power * (0.5 * (kappa + h) - (kappa + h) * h * ehx / den);
    return {log_a, b, dlog_a, db};
}

double cir3_bond_price(const Cir3Params& params, const std::array<double, 3>& factors, double x) {
    double log_p = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        const CirAffine c = cir_affine(params.kappa[i], params.theta[i], params.sigma[i], x);
        log_p += c.log_a - c.b * factors[i];
    }
    return std::exp(log_p);
}

Cir3Simulation simulate_cir3(const Cir3Params& params, std::size_t observations, double dt,
                             const MaturityGrid& grid, Rng& rng) {
    params.validate();
    if (!(dt > 0.0)) throw DataError("simulate_cir3: dt must be positive");
    if (observations < 1) throw DataError("simulate_cir3: need at least one observation");

    const auto T = static_cast<Eigen::Index>(observations);
    const auto n = static_cast<Eigen::Index>(grid.size());
    std::vector<std::array<CirAffine, 3>> coef(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k)
        for (std::size_t i = 0; i < 3; ++i)
            coef[k][i] = cir_affine(params.kappa[i], params.theta[i], params.sigma[i], grid[k]);

    Matrix factors(T, 3);
    std::array<double, 3> state = params.y0;
    const double sqrt_dt = std::sqrt(dt);
    for (Eigen::Index t = 0; t < T; ++t) {
        if (t > 0) {
            for (std::size_t i = 0; i < 3; ++i) {
                const double pos = std::max(state[i], 0.0);
                const double z = rng.normal();
                state[i] += params.kappa[i] * (params.theta[i] - pos) * dt + params.sigma[i] * std::sqrt(pos) * sqrt_dt * z;
            }
        }
        for (std::size_t i = 0; i < 3; ++i) factors(t, static_cast<Eigen::Index>(i)) = std::max(state[i], 0.0);
    }

    Matrix prices(T, n), yields(T, n), forwards(T, n);
    for (Eigen::Index t = 0; t < T; ++t) {
        for (Eigen::Index k = 0; k < n; ++k) {
            double log_p = 0.0;
            double fwd = 0.0;
            for (std::size_t i = 0; i < 3; ++i) {
                const CirAffine& c = coef[static_cast<std::size_t>(k)][i];
                const double y = factors(t, static_cast<Eigen::Index>(i));
                log_p += c.log_a - c.b * y;
                fwd += -c.dlog_a + c.db * y;
            }
            prices(t, k) = std::exp(log_p);
            yields(t, k) = -log_p / grid[static_cast<std::size_t>(k)];
            forwards(t, k) = fwd;
        }
    }
    return {std::move(factors),
            CurvePanel(grid, std::move(prices), CurveKind::price, Transform::level, dt),
            CurvePanel(grid, std::move(yields), CurveKind::yield, Transform::level, dt),
            CurvePanel(grid, std::move(forwards), CurveKind::forward, Transform::level, dt)};
}

// ---------------------------------------------------------------------------
// g2++

namespace {

struct G2Terms {
    double k[2];
    double v[2];
    double rho;
};

G2Terms terms(const G2ppParams& p) { return {{p.kappa1, p.kappa2}, {p.vol1, p.vol2}, p.rho}; }

double rho_ij(const G2Terms& g, int i, int j) { return i == j ? 1.0 : g.rho; }

// V(tau): variance of the integrated short-rate factors over a horizon tau.
double g2_v(const G2Terms& g, double tau) {
    double v = 0.0;
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            const double ki = g.k[i], kj = g.k[j];
            const double c = rho_ij(g, i, j) * g.v[i] * g.v[j] / (ki * kj);
            v += c * (tau + std::expm1(-ki * tau) / ki + std::expm1(-kj * tau) / kj -
                      std::expm1(-(ki + kj) * tau) / (ki + kj));
        }
    }
    return v;
}

// dV/dtau
double g2_dv(const G2Terms& g, double tau) {
    double v = 0.0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            v += rho_ij(g, i, j) * g.v[i] * g.v[j] / (g.k[i] * g.k[j]) * (-std::expm1(-g.k[i] * tau)) *
                 (-std::expm1(-g.k[j] * tau));
    return v;
}

}  // namespace

G2ppParams G2ppParams::set1() { return {0.8, 0.7, 0.1, 0.1, -0.3, 0.05}; }

G2ppParams G2ppParams::set2() { return {0.9, 0.85, 0.1, 0.2, -0.3, 0.05}; }

void G2ppParams::validate() const {
    if (!(kappa1 > 0.0) || !(kappa2 > 0.0)) throw DataError("g2++: mean reversion speeds must be positive");
    if (!(vol1 >= 0.0) || !(vol2 >= 0.0)) throw DataError("g2++: volatilities must be nonnegative");
    if (!(std::abs(rho) <= 1.0)) throw DataError("g2++: correlation must lie in [-1, 1]");
    if (!std::isfinite(flat_rate)) throw DataError("g2++: flat initial rate must be finite");
}

std::string_view to_string(VolForm form) { return form == VolForm::standard ? "standard" : "paper"; }

VolForm vol_form_from_string(std::string_view text) {
    if (text == "standard") return VolForm::standard;
    if (text == "paper") return VolForm::paper;
    throw DataError("unknown vol_form '" + std::string(text) + "' (expected standard or paper)");
}

double g2pp_forward_vol(const G2ppParams& p, double tau, VolForm form) {
    if (tau < 0.0) throw DataError("g2pp_forward_vol: negative time to maturity");
    const double m = form == VolForm::standard ? 2.0 : 1.0;
    const double radicand = p.vol1 * p.vol1 * std::exp(-m * p.kappa1 * tau) +
                            p.vol2 * p.vol2 * std::exp(-m * p.kappa2 * tau) +
                            2.0 * p.vol1 * p.vol2 * p.rho * std::exp(-(p.kappa1 + p.kappa2) * tau);
    if (radicand < 0.0) {
        if (radicand > -1e-15) return 0.0;
        throw NumericalError("g2pp_forward_vol: negative radicand");
    }
    return std::sqrt(radicand);
}

double g2pp_discount(const G2ppParams& p, double maturity) { return std::exp(-p.flat_rate * maturity); }

double g2pp_bond_price(const G2ppParams& p, double t, double x, double x1, double x2) {
    const G2Terms g = terms(p);
    const double b1 = -std::expm1(-g.k[0] * x) / g.k[0];
    const double b2 = -std::expm1(-g.k[1] * x) / g.k[1];
    const double log_p = -p.flat_rate * x + 0.5 * (g2_v(g, x) - g2_v(g, t + x) + g2_v(g, t)) - b1 * x1 - b2 * x2;
    return std::exp(log_p);
}

double g2pp_forward_rate(const G2ppParams& p, double t, double x, double x1, double x2) {
    const G2Terms g = terms(p);
    return p.flat_rate + 0.5 * (g2_dv(g, t + x) - g2_dv(g, x)) + std::exp(-g.k[0] * x) * x1 +
           std::exp(-g.k[1] * x) * x2;
}

double g2pp_shift(const G2ppParams& p, double t) { return p.flat_rate + 0.5 * g2_dv(terms(p), t); }

G2ppSimulation simulate_g2pp(const G2ppParams& params, std::size_t observations, double dt,
                             const MaturityGrid& grid, Rng& rng) {
    params.validate();
    if (!(dt > 0.0)) throw DataError("simulate_g2pp: dt must be positive");
    if (observations < 1) throw DataError("simulate_g2pp: need at least one observation");
    const G2Terms g = terms(params);

    const double decay1 = std::exp(-g.k[0] * dt);
    const double decay2 = std::exp(-g.k[1] * dt);
    const double var1 = g.v[0] * g.v[0] * (-std::expm1(-2.0 * g.k[0] * dt)) / (2.0 * g.k[0]);
    const double var2 = g.v[1] * g.v[1] * (-std::expm1(-2.0 * g.k[1] * dt)) / (2.0 * g.k[1]);
    const double cov = g.rho * g.v[0] * g.v[1] * (-std::expm1(-(g.k[0] + g.k[1]) * dt)) / (g.k[0] + g.k[1]);
    const double l11 = std::sqrt(var1);
    const double l21 = l11 > 0.0 ? cov / l11 : 0.0;
    const double l22 = std::sqrt(std::max(var2 - l21 * l21, 0.0));

    const auto T = static_cast<Eigen::Index>(observations);
    const auto n = static_cast<Eigen::Index>(grid.size());
    Matrix factors(T, 2);
    double x1 = 0.0, x2 = 0.0;
    for (Eigen::Index t = 0; t < T; ++t) {
        if (t > 0) {
            const double z1 = rng.normal();
            const double z2 = rng.normal();
            x1 = x1 * decay1 + l11 * z1;
            x2 = x2 * decay2 + l21 * z1 + l22 * z2;
        }
        factors(t, 0) = x1;
        factors(t, 1) = x2;
    }

    // state-independent parts of log P(t, t+x) and f(t, t+x)
    std::vector<double> b1(grid.size()), b2(grid.size()), e1(grid.size()), e2(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        b1[k] = -std::expm1(-g.k[0] * grid[k]) / g.k[0];
        b2[k] = -std::expm1(-g.k[1] * grid[k]) / g.k[1];
        e1[k] = std::exp(-g.k[0] * grid[k]);
        e2[k] = std::exp(-g.k[1] * grid[k]);
    }
    Matrix prices(T, n), yields(T, n), forwards(T, n);
    for (Eigen::Index t = 0; t < T; ++t) {
        const double time = static_cast<double>(t) * dt;
        const double vt = g2_v(g, time);
        for (Eigen::Index k = 0; k < n; ++k) {
            const auto kk = static_cast<std::size_t>(k);
            const double x = grid[kk];
            const double log_p = -params.flat_rate * x + 0.5 * (g2_v(g, x) - g2_v(g, time + x) + vt) -
                                 b1[kk] * factors(t, 0) - b2[kk] * factors(t, 1);
            prices(t, k) = std::exp(log_p);
            yields(t, k) = -log_p / x;
            forwards(t, k) = params.flat_rate + 0.5 * (g2_dv(g, time + x) - g2_dv(g, x)) + e1[kk] * factors(t, 0) +
                             e2[kk] * factors(t, 1);
        }
    }
    return {std::move(factors),
            CurvePanel(grid, std::move(prices), CurveKind::price, Transform::level, dt),
            CurvePanel(grid, std::move(yields), CurveKind::yield, Transform::level, dt),
            CurvePanel(grid, std::move(forwards), CurveKind::forward, Transform::level, dt)};
}

double g2pp_integrated_variance(const G2ppParams& params, double expiry, double maturity) {
    if (!(expiry > 0.0)) throw DataError("g2pp_integrated_variance: expiry must be positive");
    if (!(maturity > expiry)) throw DataError("g2pp_integrated_variance: need expiry < maturity");
    const G2Terms g = terms(params);
    const double tenor = maturity - expiry;
    double v = 0.0;
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            const double ki = g.k[i], kj = g.k[j];
            v += rho_ij(g, i, j) * g.v[i] * g.v[j] / (ki * kj) * (-std::expm1(-ki * tenor)) *
                 (-std::expm1(-kj * tenor)) * (-std::expm1(-(ki + kj) * expiry)) / (ki + kj);
        }
    }
    return std::max(v, 0.0);
}

void OptionSpec::validate() const {
    if (!(expiry > 0.0) || !(maturity > expiry)) throw DataError("option: need 0 < expiry < maturity");
    if (!(strike > 0.0)) throw DataError("option: strike must be positive");
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double gaussian_bond_call(double discount_maturity, double discount_expiry, double strike, double variance) {
    if (!(variance > 0.0)) return std::max(discount_maturity - strike * discount_expiry, 0.0);
    const double sd = std::sqrt(variance);
    const double m = std::log(discount_maturity / (strike * discount_expiry));
    const double d_plus = (m + 0.5 * variance) / sd;
    const double d_minus = (m - 0.5 * variance) / sd;
    return discount_maturity * normal_cdf(d_plus) - strike * discount_expiry * normal_cdf(d_minus);
}

double g2pp_option_price(const G2ppParams& params, const OptionSpec& option) {
    params.validate();
    option.validate();
    const double v = g2pp_integrated_variance(params, option.expiry, option.maturity);
    return gaussian_bond_call(g2pp_discount(params, option.maturity), g2pp_discount(params, option.expiry),
                              option.strike, v);
}

}  // namespace fwdpca
