#pragma once

#include <string>
#include <vector>

#include "gmpc/bnn.hpp"
#include "gmpc/meals.hpp"
#include "gmpc/mpc.hpp"
#include "gmpc/sim.hpp"

namespace gmpc {

struct BnnSettings {
    bnn::ModelShape shape{};
    double dropout = 0.1;
    bnn::TrainConfig train{};
    bnn::TrainConfig finetune{0.1, 0.9, 1e-4, 8, 60, 15, 6, 0.5, 1.0};
    double validation_fraction = 0.1;
};

/// Experiment sizes and protocol knobs. Defaults are the desk-scale setup.
struct HarnessSettings {
    int foundation_patients = 10;
    int foundation_days = 60;
    int test_patients = 5;
    int finetune_days = 30;
    int validation_days = 60;
    int closed_loop_days = 60;
    int calibration_patients = 20;
    int calibration_days = 60;
    int calibration_warmup_days = 7;
    int window_stride = 6;
    double u_max = 1.0;
    int dose_block_min = 1;
    int dose_block_max = 5;
    std::vector<double> baseline_grid = default_grid();
    double satisfaction_target = 0.95;
    double baseline_percentile = 0.95;
    double initial_dose = 0.5;
    double sub_step = kDefaultSubStep;
    int noise_floor_samples = 4000;

    static std::vector<double> default_grid();
};

struct Config {
    ParamBounds sim{};
    MealBounds meals{};
    BnnSettings bnn{};
    mpc::MpcConfig mpc{};
    HarnessSettings harness{};

    void validate() const;
};

/// Parses the JSON config; sections sim, meals, bnn, mpc and harness are all
/// optional, but unknown sections or keys raise ConfigError.
Config parse_config(const std::string& json_text);
Config load_config(const std::string& path);
std::string config_to_json(const Config& config);

}  // namespace gmpc
