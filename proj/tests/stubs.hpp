#pragma once

#include <vector>

#include "gmpc/mpc.hpp"

namespace gmpc::testing {

/// Forecasts that ignore the history. Each day's mean depends only on that
/// day's bolus: mu = theta + slope * (reference - dose) + offset, sigma fixed.
class DoseResponseStub final : public mpc::SymptomPredictor {
public:
    DoseResponseStub(double theta, double reference, double slope, double offset, double sigma)
        : theta_(theta), reference_(reference), slope_(slope), offset_(offset), sigma_(sigma) {}

    std::vector<bnn::ForecastDistribution> forecast(const mpc::SymptomHistory&,
                                                    std::span<const mpc::FutureInputs> futures) override {
        ++calls;
        std::vector<bnn::ForecastDistribution> out;
        for (const auto& f : futures) {
            bnn::ForecastDistribution d;
            const int hours = static_cast<int>(f.doses.size());
            d.mu.resize(hours, 2);
            d.sigma = Eigen::MatrixXd::Constant(hours, 2, sigma_);
            d.passes = 1;
            for (int day = 0; day < hours / 24; ++day) {
                double dose = 0.0;
                for (int h = 0; h < 24; ++h) dose += f.doses[static_cast<std::size_t>(day * 24 + h)];
                const double m = theta_ + slope_ * (reference_ - dose) + offset_;
                d.mu.middleRows(day * 24, 24).setConstant(m);
            }
            out.push_back(std::move(d));
        }
        return out;
    }

    int calls = 0;

private:
    double theta_, reference_, slope_, offset_, sigma_;
};

/// Constant forecasts regardless of input.
class ConstantStub final : public mpc::SymptomPredictor {
public:
    ConstantStub(double mu, double sigma) : mu_(mu), sigma_(sigma) {}

    std::vector<bnn::ForecastDistribution> forecast(const mpc::SymptomHistory&,
                                                    std::span<const mpc::FutureInputs> futures) override {
        std::vector<bnn::ForecastDistribution> out;
        for (const auto& f : futures) {
            const auto n = static_cast<Eigen::Index>(f.doses.size());
            out.push_back({Eigen::MatrixXd::Constant(n, 2, mu_), Eigen::MatrixXd::Constant(n, 2, sigma_), 1});
        }
        return out;
    }

private:
    double mu_, sigma_;
};

inline mpc::ScenarioSampler flat_meals() {
    return [](int count, int days) {
        return std::vector<std::vector<double>>(static_cast<std::size_t>(count),
                                                std::vector<double>(static_cast<std::size_t>(days) * 24, 0.5));
    };
}

inline mpc::SymptomHistory empty_history() {
    return {Eigen::MatrixXd::Constant(72, 2, 3.0), std::vector<double>(72, 0.0), std::vector<double>(72, 0.0)};
}

}  // namespace gmpc::testing
