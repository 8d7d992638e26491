#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gmpc/bnn.hpp"
#include "gmpc/config.hpp"
#include "gmpc/meals.hpp"
#include "gmpc/mpc.hpp"
#include "gmpc/sim.hpp"

namespace gmpc {

// ---- episodes and windows ------------------------------------------------------

/// Hourly trace of one patient. `acid` is simulator ground truth and must
/// never reach a model input.
struct EpisodeRecord {
    int patient_id = 0;
    std::vector<double> t_hours;
    std::vector<double> meal;
    std::vector<double> dose;
    std::vector<int> reflux;
    std::vector<int> digestion;
    std::vector<double> acid;

    std::size_t size() const { return t_hours.size(); }
    void validate() const;
    void append(const EpisodeRecord& other);
};

/// Daily levels drawn U(0, u_max) and held for blocks of
/// [block_min, block_max] days, given as boluses at `dose_hour`.
std::vector<double> random_dose_schedule(int n_days, double u_max, int block_min, int block_max, int dose_hour,
                                         Rng& rng);

/// Twice-daily regimen: half the daily dose at hours 8 and 18.
std::vector<double> fixed_regimen_schedule(double daily_dose, int n_days);

/// Simulates hourly inputs from `state` (advanced in place) and encodes the
/// symptoms with `noise_rng`. Hours are numbered from `first_hour`.
EpisodeRecord simulate_record(int patient_id, const PatientParams& params, std::span<const double> meals,
                              std::span<const double> doses, SimState& state, Rng& noise_rng, int first_hour,
                              double dt_sub);

/// Population normalization: meal by the observed maximum, dose by u_max.
bnn::Normalization normalization_for(std::span<const EpisodeRecord> episodes, double u_max);

/// Sliding windows of T_hist + T_fut hours with the given stride. Only meal,
/// dose and the two reported scores are read.
std::vector<bnn::WindowSample> extract_windows(const EpisodeRecord& record, const bnn::ModelShape& shape,
                                               const bnn::Normalization& norm, int stride);

struct WindowSplit {
    std::vector<bnn::WindowSample> train;
    std::vector<bnn::WindowSample> validation;
};

/// The last `fraction` of the windows (at least one when two or more exist)
/// go to validation, keeping temporal order.
WindowSplit temporal_split(std::vector<bnn::WindowSample> windows, double fraction);

void write_episode_csv(const EpisodeRecord& record, std::ostream& out, bool include_hidden);
EpisodeRecord read_episode_csv(std::istream& in, int patient_id);

// ---- foundation dataset ----------------------------------------------------------

struct FoundationDataset {
    std::uint64_t seed = 0;
    int n_days = 0;
    std::vector<PatientParams> patients;
    std::vector<EpisodeRecord> episodes;
    bnn::Normalization norm;
    WindowSplit windows;
};

FoundationDataset generate_foundation_dataset(const Config& config, int n_patients, int n_days, std::uint64_t seed);

/// Writes dataset.json plus episodes/patient_NNN.csv under `dir`.
void write_dataset(const FoundationDataset& data, const Config& config, const std::string& dir, bool include_hidden);
FoundationDataset read_dataset(const std::string& dir, const Config& config);

bnn::ModelWeights train_foundation(const FoundationDataset& data, const Config& config, std::uint64_t seed,
                                   bnn::TrainHistory* history = nullptr);

// ---- test patients -----------------------------------------------------------------

/// A held-out patient with its fine-tuning history already simulated.
struct TestPatient {
    int id = 0;
    PatientParams params;
    EpisodeRecord history;
    SimState state;  ///< state at the end of the history
};

TestPatient make_test_patient(const Config& config, std::uint64_t seed, int index);

bnn::TrainResult finetune_for_patient(const bnn::ModelWeights& foundation, const TestPatient& patient,
                                      const Config& config, std::uint64_t seed);

// ---- open-loop validation --------------------------------------------------------------

struct OpenLoopResult {
    EpisodeRecord record;          ///< evaluation period only
    Eigen::MatrixXd prediction;    ///< N x 2 deterministic-mean forecasts (score units)
    Eigen::MatrixXd sigma;         ///< N x 2 MC-dropout standard deviations
    Eigen::MatrixXd oracle;        ///< N x 2 noise-channel expectation given true acid
    double rmse_reflux = 0.0;
    double rmse_digestion = 0.0;
    double floor_reflux = 0.0;     ///< RMSE of the oracle predictor
    double floor_digestion = 0.0;
};

double rmse(std::span<const double> prediction, std::span<const double> truth);

/// Expected report E[clip(floor(S(acid) + eta + n))] for each hour, estimated
/// with `samples` noise draws per hour.
Eigen::MatrixXd noise_channel_expectation(std::span<const double> acid, const PatientParams& p, int samples, Rng& rng);

OpenLoopResult run_open_loop_validation(const bnn::ModelWeights& weights, const TestPatient& patient, int n_days,
                                        const Config& config, std::uint64_t seed);

void write_open_loop_csv(const OpenLoopResult& r, std::ostream& out);

// ---- closed loop and fixed regimen ----------------------------------------------------

struct ViolationEpisode {
    std::string symptom;  ///< "reflux" or "digestion"
    int start_hour = 0;
    int length = 0;
};

struct ArmResult {
    EpisodeRecord record;
    std::vector<double> daily_doses;
    double usage = 0.0;
    double sat_reflux = 0.0;
    double sat_digestion = 0.0;
    double sat_joint = 0.0;
    std::vector<ViolationEpisode> violations;
};

struct DailyDecision {
    int day = 0;
    double dose = 0.0;
    std::string plan;
    double score = 0.0;
    double worst_violation = 0.0;
    double mean_sigma = 0.0;
    double indicator_fraction = 1.0;
};

struct ClosedLoopResult {
    ArmResult arm;
    std::vector<DailyDecision> decisions;
};

/// Satisfaction fractions and violation runs over the hourly reports.
void score_arm(ArmResult& arm, double theta);

/// True meals for the evaluation period of a patient; identical for every
/// arm that uses the same seed.
std::vector<double> evaluation_meals(const Config& config, std::uint64_t seed, const TestPatient& patient, int n_days);

ClosedLoopResult run_closed_loop(const bnn::ModelWeights& weights, const TestPatient& patient, int n_days,
                                 const mpc::MpcConfig& mpc_config, const Config& config, std::uint64_t seed);

/// Closed loop with any predictor (used with stub predictors in tests).
ClosedLoopResult run_closed_loop(mpc::SymptomPredictor& predictor, const TestPatient& patient, int n_days,
                                 const mpc::MpcConfig& mpc_config, const Config& config, std::uint64_t seed);

ArmResult run_fixed_regimen(const TestPatient& patient, double daily_dose, int n_days, const Config& config,
                            std::uint64_t seed);

struct Calibration {
    std::vector<double> grid;
    std::vector<double> requirement;  ///< per calibration patient; u_max-or-top-of-grid when unreachable
    std::vector<bool> reachable;
    std::vector<std::vector<double>> satisfaction;  ///< patient x grid, joint satisfaction
    double dose = 0.0;
    bool all_reachable = true;
};

/// Minimal grid dose reaching the satisfaction target per calibration patient,
/// then the configured percentile (nearest rank) across the population.
Calibration calibrate_fixed_regimen(const Config& config, std::uint64_t seed);

// ---- reports ------------------------------------------------------------------------------

struct PatientReport {
    int patient_id = 0;
    std::optional<ArmResult> mpc;
    std::optional<ArmResult> fixed;
    double rmse_reflux = -1.0;  ///< negative when not measured
    double rmse_digestion = -1.0;
};

struct BenchmarkReport {
    std::vector<PatientReport> patients;
    double fixed_dose = 0.0;
    double theta = 0.0;
};

struct BenchmarkSummary {
    double mean_reduction_pct = 0.0;
    double min_satisfaction_pct = 0.0;        ///< MPC arm, min over patients and symptoms
    double min_fixed_satisfaction_pct = 0.0;
    int patients = 0;
};

BenchmarkSummary evaluate(const BenchmarkReport& report);

/// JSON / CSV renderings. Traces are not included; only per-arm metrics.
std::string report_to_json(const BenchmarkReport& report, const BenchmarkSummary* summary = nullptr);
std::string report_to_csv(const BenchmarkReport& report);
BenchmarkReport report_from_json(const std::string& text);

/// Merges patient rows from several partial reports (e.g. one MPC arm and
/// one fixed arm file) keyed by patient id.
BenchmarkReport merge_reports(std::span<const BenchmarkReport> parts);

void write_arm_trace_csv(const ArmResult& arm, std::ostream& out, bool include_hidden);

}  // namespace gmpc
