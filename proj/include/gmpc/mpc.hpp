#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gmpc/bnn.hpp"

namespace gmpc::mpc {

/// Inverse standard-normal CDF; absolute error below 1e-9 on (0, 1).
double normal_quantile(double p);

enum class DoseAction : std::uint8_t { Decrease = 0, Maintain = 1, Increase = 2 };

char action_code(DoseAction a);  ///< '-', '=', '+'

struct MpcConfig {
    double theta = 5.0;        ///< symptom threshold (score units)
    double confidence = 0.9;   ///< p of the chance constraint
    double lambda = 0.025;       ///< violation penalty weight
    double dose_cost = 1.0;    ///< c, cost per unit dose
    int horizon_days = 3;      ///< decision intervals in the plan
    int scenarios = 5;         ///< J meal scenarios
    int mc_passes = 30;        ///< M dropout passes per forecast
    double u_min = 0.05;
    double u_max = 1.0;
    std::array<double, 3> action_factors{0.8, 1.0, 1.2};
    std::size_t enumeration_cap = 6561;  ///< 3^8
    int dose_hour = 6;                    ///< hour of the daily bolus within each 24 h interval

    double beta() const { return normal_quantile(confidence); }
    void validate() const;
};

struct DosePlan {
    std::vector<DoseAction> actions;
    std::vector<double> doses;     ///< absolute daily doses after clamping
    double usage = 0.0;            ///< sum of c * dose
    double worst_violation = 0.0;  ///< max over scenarios of the rectified exceedance
    double score = 0.0;            ///< usage + lambda * worst_violation
    double mean_sigma = 0.0;       ///< sum over steps/channels of the scenario-averaged sigma (logged only)
    /// Smallest per-step, per-channel fraction of scenarios whose mean forecast
    /// is at or below theta (logged only; the indicator form of the constraint).
    double indicator_fraction = 1.0;

    std::string action_string() const;
};

/// Every action sequence of length horizon_days, in lexicographic order with
/// Decrease < Maintain < Increase. Throws ConfigError above enumeration_cap.
std::vector<DosePlan> expand_candidates(double current_dose, const MpcConfig& config);

/// Daily doses placed as boluses at `dose_hour` of each day on the hourly grid.
std::vector<double> hourly_dose_schedule(std::span<const double> daily_doses, int dose_hour = 0);

/// Sum over steps and both channels of max(0, mu + beta sigma - theta).
double violation(const Eigen::MatrixXd& mu, const Eigen::MatrixXd& sigma, double theta, double beta);

/// Fills usage, worst_violation, score, mean_sigma and indicator_fraction of `plan`.
DosePlan score_plan(DosePlan plan, std::span<const bnn::ForecastDistribution> forecasts, const MpcConfig& config);

/// Strict ordering used to pick the best plan: score, then usage, then the
/// lexicographically smaller action sequence.
bool plan_precedes(const DosePlan& a, const DosePlan& b);

/// Hourly past observations in raw units (scores 1-10, meal intensity, dose).
struct SymptomHistory {
    Eigen::MatrixXd symptoms;  ///< T_hist x 2
    std::vector<double> meals;
    std::vector<double> doses;
};

struct FutureInputs {
    std::vector<double> meals;
    std::vector<double> doses;
};

/// Anything that maps a history plus candidate futures to per-step Gaussian
/// symptom forecasts in score units.
class SymptomPredictor {
public:
    virtual ~SymptomPredictor() = default;
    virtual std::vector<bnn::ForecastDistribution> forecast(const SymptomHistory& history,
                                                            std::span<const FutureInputs> futures) = 0;
};

/// MC-dropout network behind the predictor interface.
class BnnPredictor final : public SymptomPredictor {
public:
    BnnPredictor(const bnn::ModelWeights& weights, int passes, std::uint64_t seed)
        : weights_(weights), passes_(passes), rng_(seed) {}

    std::vector<bnn::ForecastDistribution> forecast(const SymptomHistory& history,
                                                    std::span<const FutureInputs> futures) override;

    const bnn::ModelWeights& weights() const { return weights_; }

private:
    bnn::ModelWeights weights_;
    int passes_;
    Rng rng_;
};

/// Returns `count` hourly meal profiles of horizon_days * 24 samples.
using ScenarioSampler = std::function<std::vector<std::vector<double>>(int count, int horizon_days)>;

struct MpcDecision {
    DosePlan best;
    double dose = 0.0;                 ///< first day's dose
    std::vector<double> next_hours;    ///< 24 hourly dose values for the next interval
    std::size_t plans_scored = 0;
    std::vector<DosePlan> all_plans;   ///< every scored candidate, enumeration order
};

/// Scores every candidate under every scenario and applies the first day of
/// the best plan.
MpcDecision solve(const SymptomHistory& history, SymptomPredictor& predictor, const ScenarioSampler& sampler,
                  double current_dose, const MpcConfig& config);

}  // namespace gmpc::mpc
