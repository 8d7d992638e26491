#include "gmpc/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gmpc/error.hpp"

namespace gmpc::mpc {

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("normal quantile requires 0 < p < 1");
    // Acklam's rational approximation followed by one Halley step on the
    // erfc-based CDF.
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01,  -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
    constexpr double p_low = 0.02425;
    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

char action_code(DoseAction a) {
    switch (a) {
        case DoseAction::Decrease: return '-';
        case DoseAction::Maintain: return '=';
        case DoseAction::Increase: return '+';
    }
    return '?';
}

std::string DosePlan::action_string() const {
    std::string s;
    for (DoseAction a : actions) s.push_back(action_code(a));
    return s;
}

void MpcConfig::validate() const {
    if (!(confidence > 0.0 && confidence < 1.0)) throw ConfigError("mpc confidence must lie in (0, 1)");
    if (!(lambda >= 0.0)) throw ConfigError("mpc lambda must be non-negative");
    if (!(dose_cost >= 0.0)) throw ConfigError("mpc dose cost must be non-negative");
    if (horizon_days < 1) throw ConfigError("mpc horizon must be at least one day");
    if (scenarios < 1) throw ConfigError("mpc scenario count must be at least 1");
    if (mc_passes < 1) throw ConfigError("mpc Monte Carlo pass count must be at least 1");
    if (!(u_min >= 0.0 && u_min <= u_max && u_max <= 1.0)) throw ConfigError("mpc dose bounds must satisfy 0 <= u_min <= u_max <= 1");
    for (double f : action_factors)
        if (!(f > 0.0)) throw ConfigError("mpc action factors must be positive");
    if (dose_hour < 0 || dose_hour > 23) throw ConfigError("mpc dose_hour must lie in [0, 23]");
}

std::vector<DosePlan> expand_candidates(double current_dose, const MpcConfig& config) {
    config.validate();
    double count = std::pow(3.0, config.horizon_days);
    if (count > static_cast<double>(config.enumeration_cap))
        throw ConfigError("3^" + std::to_string(config.horizon_days) + " candidate plans exceed the enumeration cap of " +
                          std::to_string(config.enumeration_cap) + "; use a smaller horizon_days");
    const auto n = static_cast<std::size_t>(count);
    std::vector<DosePlan> plans(n);
    for (std::size_t k = 0; k < n; ++k) {
        DosePlan& plan = plans[k];
        plan.actions.resize(static_cast<std::size_t>(config.horizon_days));
        std::size_t code = k;
        for (int t = config.horizon_days - 1; t >= 0; --t) {
            plan.actions[static_cast<std::size_t>(t)] = static_cast<DoseAction>(code % 3);
            code /= 3;
        }
        double dose = current_dose;
        for (DoseAction a : plan.actions) {
            dose = std::clamp(dose * config.action_factors[static_cast<std::size_t>(a)], config.u_min, config.u_max);
            plan.doses.push_back(dose);
        }
    }
    return plans;
}

std::vector<double> hourly_dose_schedule(std::span<const double> daily_doses, int dose_hour) {
    if (dose_hour < 0 || dose_hour > 23) throw DomainError("dose hour must lie in [0, 23]");
    std::vector<double> hourly(daily_doses.size() * 24, 0.0);
    for (std::size_t d = 0; d < daily_doses.size(); ++d) hourly[d * 24 + static_cast<std::size_t>(dose_hour)] = daily_doses[d];
    return hourly;
}

double violation(const Eigen::MatrixXd& mu, const Eigen::MatrixXd& sigma, double theta, double beta) {
    if (mu.rows() != sigma.rows() || mu.cols() != sigma.cols())
        throw ShapeError("forecast mean is " + std::to_string(mu.rows()) + "x" + std::to_string(mu.cols()) +
                         " but sigma is " + std::to_string(sigma.rows()) + "x" + std::to_string(sigma.cols()));
    double v = 0.0;
    for (Eigen::Index t = 0; t < mu.rows(); ++t)
        for (Eigen::Index i = 0; i < mu.cols(); ++i) v += std::max(0.0, mu(t, i) + beta * sigma(t, i) - theta);
    return v;
}

DosePlan score_plan(DosePlan plan, std::span<const bnn::ForecastDistribution> forecasts, const MpcConfig& config) {
    if (forecasts.empty()) throw ConfigError("scoring requires at least one scenario forecast");
    const double beta = config.beta();
    plan.usage = 0.0;
    for (double u : plan.doses) plan.usage += config.dose_cost * u;
    plan.worst_violation = 0.0;
    Eigen::MatrixXd sigma_sum = Eigen::MatrixXd::Zero(forecasts.front().sigma.rows(), forecasts.front().sigma.cols());
    Eigen::MatrixXd below = sigma_sum;
    for (const auto& f : forecasts) {
        plan.worst_violation = std::max(plan.worst_violation, violation(f.mu, f.sigma, config.theta, beta));
        if (f.sigma.rows() != sigma_sum.rows() || f.sigma.cols() != sigma_sum.cols())
            throw ShapeError("scenario forecasts have inconsistent shapes");
        sigma_sum += f.sigma;
        below.array() += (f.mu.array() <= config.theta).cast<double>();
    }
    const auto J = static_cast<double>(forecasts.size());
    plan.mean_sigma = sigma_sum.sum() / J;
    plan.indicator_fraction = below.size() ? below.minCoeff() / J : 1.0;
    plan.score = plan.usage + config.lambda * plan.worst_violation;
    return plan;
}

bool plan_precedes(const DosePlan& a, const DosePlan& b) {
    if (a.score != b.score) return a.score < b.score;
    if (a.usage != b.usage) return a.usage < b.usage;
    return a.actions < b.actions;
}

std::vector<bnn::ForecastDistribution> BnnPredictor::forecast(const SymptomHistory& history,
                                                              std::span<const FutureInputs> futures) {
    const auto& shape = weights_.shape;
    if (history.symptoms.rows() < shape.t_hist || history.meals.size() < static_cast<std::size_t>(shape.t_hist) ||
        history.doses.size() < static_cast<std::size_t>(shape.t_hist))
        throw ShapeError("history shorter than the model's " + std::to_string(shape.t_hist) + " steps");
    // Use the most recent T_hist hours.
    const Eigen::Index off = history.symptoms.rows() - shape.t_hist;
    const std::size_t moff = history.meals.size() - static_cast<std::size_t>(shape.t_hist);
    const std::size_t doff = history.doses.size() - static_cast<std::size_t>(shape.t_hist);
    Eigen::MatrixXd hs(shape.t_hist, 2), hi(shape.t_hist, 2);
    for (int t = 0; t < shape.t_hist; ++t) {
        hs(t, 0) = bnn::normalize_symptom(history.symptoms(off + t, 0));
        hs(t, 1) = bnn::normalize_symptom(history.symptoms(off + t, 1));
        hi(t, 0) = history.meals[moff + static_cast<std::size_t>(t)] / weights_.norm.meal_scale;
        hi(t, 1) = history.doses[doff + static_cast<std::size_t>(t)] / weights_.norm.dose_scale;
    }
    std::vector<Eigen::MatrixXd> fut;
    fut.reserve(futures.size());
    for (const FutureInputs& f : futures) {
        if (f.meals.size() != static_cast<std::size_t>(shape.t_fut) || f.doses.size() != static_cast<std::size_t>(shape.t_fut))
            throw ShapeError("future inputs must have " + std::to_string(shape.t_fut) + " steps, got " +
                             std::to_string(f.meals.size()) + "/" + std::to_string(f.doses.size()));
        Eigen::MatrixXd m(shape.t_fut, 2);
        for (int t = 0; t < shape.t_fut; ++t) {
            m(t, 0) = f.meals[static_cast<std::size_t>(t)] / weights_.norm.meal_scale;
            m(t, 1) = f.doses[static_cast<std::size_t>(t)] / weights_.norm.dose_scale;
        }
        fut.push_back(std::move(m));
    }
    return bnn::predict_mc_shared(weights_, hs, hi, fut, passes_, rng_);
}

MpcDecision solve(const SymptomHistory& history, SymptomPredictor& predictor, const ScenarioSampler& sampler,
                  double current_dose, const MpcConfig& config) {
    config.validate();
    std::vector<DosePlan> plans = expand_candidates(current_dose, config);
    const auto scenarios = sampler(config.scenarios, config.horizon_days);
    if (scenarios.size() != static_cast<std::size_t>(config.scenarios))
        throw ShapeError("scenario sampler returned " + std::to_string(scenarios.size()) + " profiles, expected " +
                         std::to_string(config.scenarios));
    const std::size_t horizon_hours = static_cast<std::size_t>(config.horizon_days) * 24;

    std::vector<FutureInputs> futures;
    futures.reserve(plans.size() * scenarios.size());
    for (const DosePlan& plan : plans) {
        const auto hourly = hourly_dose_schedule(plan.doses, config.dose_hour);
        for (const auto& meals : scenarios) {
            if (meals.size() != horizon_hours)
                throw ShapeError("scenario has " + std::to_string(meals.size()) + " hours, expected " +
                                 std::to_string(horizon_hours));
            futures.push_back({meals, hourly});
        }
    }
    const auto forecasts = predictor.forecast(history, futures);
    if (forecasts.size() != futures.size())
        throw ShapeError("predictor returned " + std::to_string(forecasts.size()) + " forecasts for " +
                         std::to_string(futures.size()) + " inputs");

    MpcDecision decision;
    const std::size_t J = scenarios.size();
    for (std::size_t k = 0; k < plans.size(); ++k) {
        plans[k] = score_plan(std::move(plans[k]), std::span(forecasts).subspan(k * J, J), config);
        if (k == 0 || plan_precedes(plans[k], decision.best)) decision.best = plans[k];
    }
    decision.plans_scored = plans.size();
    decision.dose = decision.best.doses.front();
    decision.next_hours.assign(24, 0.0);
    decision.next_hours[static_cast<std::size_t>(config.dose_hour)] = decision.dose;
    decision.all_plans = std::move(plans);
    return decision;
}

}  // namespace gmpc::mpc
