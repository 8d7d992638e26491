#include "gmpc/sim.hpp"

#include <algorithm>
#include <cmath>

#include "gmpc/error.hpp"
#include "gmpc/random.hpp"

namespace gmpc {

namespace {

void require_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
        throw ConfigError(std::string("patient parameter ") + name + " must be positive and finite");
}

void check_range(const Range& r, const char* name) {
    if (!std::isfinite(r.lo) || !std::isfinite(r.hi))
        throw ConfigError(std::string("range ") + name + " is not finite");
    if (r.lo > r.hi)
        throw ConfigError(std::string("range ") + name + " has lower bound above upper bound");
}

}  // namespace

void PatientParams::validate() const {
    require_positive(k_e, "k_e");
    require_positive(k_bind, "k_bind");
    require_positive(k_rec, "k_rec");
    require_positive(s_meal, "s_meal");
    require_positive(k_A, "k_A");
    require_positive(k_r, "k_r");
    require_positive(k_d, "k_d");
    if (!(s0 >= 0.0)) throw ConfigError("patient parameter s0 must be non-negative");
    if (!(sigma_noise >= 0.0)) throw ConfigError("patient parameter sigma_noise must be non-negative");
    if (!(a_low < a_high)) throw ConfigError("patient parameter a_low must be below a_high");
}

ParamBounds ParamBounds::degenerate(const PatientParams& p) {
    ParamBounds b;
    b.k_e = {p.k_e, p.k_e};
    b.k_bind = {p.k_bind, p.k_bind};
    b.k_rec = {p.k_rec, p.k_rec};
    b.s0 = {p.s0, p.s0};
    b.s_meal = {p.s_meal, p.s_meal};
    b.k_A = {p.k_A, p.k_A};
    b.a_high = {p.a_high, p.a_high};
    b.a_low = {p.a_low, p.a_low};
    b.k_r = {p.k_r, p.k_r};
    b.k_d = {p.k_d, p.k_d};
    b.eta_r = {p.eta_r, p.eta_r};
    b.eta_d = {p.eta_d, p.eta_d};
    b.sigma_noise = {p.sigma_noise, p.sigma_noise};
    return b;
}

void ParamBounds::validate() const {
    check_range(k_e, "k_e");
    check_range(k_bind, "k_bind");
    check_range(k_rec, "k_rec");
    check_range(s0, "s0");
    check_range(s_meal, "s_meal");
    check_range(k_A, "k_A");
    check_range(a_high, "a_high");
    check_range(a_low, "a_low");
    check_range(k_r, "k_r");
    check_range(k_d, "k_d");
    check_range(eta_r, "eta_r");
    check_range(eta_d, "eta_d");
    check_range(sigma_noise, "sigma_noise");
}

PatientParams sample_patient(std::uint64_t seed, const ParamBounds& bounds) {
    bounds.validate();
    Rng rng(seed);
    // Draw order is part of the reproducibility contract.
    PatientParams p;
    p.k_e = uniform(rng, bounds.k_e.lo, bounds.k_e.hi);
    p.k_bind = uniform(rng, bounds.k_bind.lo, bounds.k_bind.hi);
    p.k_rec = uniform(rng, bounds.k_rec.lo, bounds.k_rec.hi);
    p.s0 = uniform(rng, bounds.s0.lo, bounds.s0.hi);
    p.s_meal = uniform(rng, bounds.s_meal.lo, bounds.s_meal.hi);
    p.k_A = uniform(rng, bounds.k_A.lo, bounds.k_A.hi);
    p.a_high = uniform(rng, bounds.a_high.lo, bounds.a_high.hi);
    p.a_low = uniform(rng, bounds.a_low.lo, bounds.a_low.hi);
    p.k_r = uniform(rng, bounds.k_r.lo, bounds.k_r.hi);
    p.k_d = uniform(rng, bounds.k_d.lo, bounds.k_d.hi);
    p.eta_r = uniform(rng, bounds.eta_r.lo, bounds.eta_r.hi);
    p.eta_d = uniform(rng, bounds.eta_d.lo, bounds.eta_d.hi);
    p.sigma_noise = uniform(rng, bounds.sigma_noise.lo, bounds.sigma_noise.hi);
    return p;
}

SimState resting_state(const PatientParams& p) { return {p.s0 / p.k_A, 1.0, 0.0}; }

StateRate derivative(const SimState& s, double meal, double dose_rate, const PatientParams& p) {
    StateRate r;
    r.d_drug = -p.k_e * s.drug + dose_rate;
    r.d_pump = p.k_rec * (1.0 - s.pump) - p.k_bind * s.drug * s.pump;
    r.d_acid = s.pump * (p.s0 + p.s_meal * meal) - p.k_A * s.acid;
    return r;
}

namespace {

SimState advance(const SimState& s, const StateRate& r, double h) {
    return {s.acid + h * r.d_acid, s.pump + h * r.d_pump, s.drug + h * r.d_drug};
}

}  // namespace

SimState step_rk4(const SimState& s, double meal, double dose_rate, const PatientParams& p, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("integration step dt must be positive");
    const StateRate k1 = derivative(s, meal, dose_rate, p);
    const StateRate k2 = derivative(advance(s, k1, 0.5 * dt), meal, dose_rate, p);
    const StateRate k3 = derivative(advance(s, k2, 0.5 * dt), meal, dose_rate, p);
    const StateRate k4 = derivative(advance(s, k3, dt), meal, dose_rate, p);

    SimState next;
    next.acid = s.acid + dt / 6.0 * (k1.d_acid + 2.0 * k2.d_acid + 2.0 * k3.d_acid + k4.d_acid);
    next.pump = s.pump + dt / 6.0 * (k1.d_pump + 2.0 * k2.d_pump + 2.0 * k3.d_pump + k4.d_pump);
    next.drug = s.drug + dt / 6.0 * (k1.d_drug + 2.0 * k2.d_drug + 2.0 * k3.d_drug + k4.d_drug);

    if (!std::isfinite(next.acid)) throw NumericalError("non-finite state field 'acid' after RK4 step");
    if (!std::isfinite(next.pump)) throw NumericalError("non-finite state field 'pump' after RK4 step");
    if (!std::isfinite(next.drug)) throw NumericalError("non-finite state field 'drug' after RK4 step");

    next.acid = std::max(next.acid, 0.0);
    next.pump = std::clamp(next.pump, 0.0, 1.0);
    next.drug = std::max(next.drug, 0.0);
    return next;
}

std::vector<double> simulate_episode(const PatientParams& p, std::span<const double> meals,
                                     std::span<const double> doses, double dt_sub, SimState& state) {
    if (meals.size() != doses.size())
        throw ShapeError("meal series has " + std::to_string(meals.size()) + " samples but dose series has " +
                         std::to_string(doses.size()));
    if (!(dt_sub > 0.0)) throw DomainError("sub-step must be positive");
    const double steps_real = 1.0 / dt_sub;
    const long steps = std::lround(steps_real);
    if (steps < 1 || std::abs(steps_real - static_cast<double>(steps)) > 1e-9)
        throw DomainError("sub-step must divide one hour");

    std::vector<double> acid;
    acid.reserve(meals.size());
    for (std::size_t h = 0; h < meals.size(); ++h) {
        if (meals[h] < 0.0 || doses[h] < 0.0) throw DomainError("meal and dose inputs must be non-negative");
        const double dose_rate = doses[h] / kDoseAbsorptionHours;
        for (long k = 0; k < steps; ++k) state = step_rk4(state, meals[h], dose_rate, p, dt_sub);
        acid.push_back(state.acid);
    }
    return acid;
}

}  // namespace gmpc
