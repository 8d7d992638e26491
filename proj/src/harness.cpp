#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>

#include "gmpc/error.hpp"
#include "gmpc/harness.hpp"
#include "gmpc/symptoms.hpp"
#include "json.hpp"

namespace gmpc {

using nlohmann::json;

namespace {

int history_days(const Config& config) {
    const int t_hist = config.bnn.shape.t_hist;
    return std::max(config.harness.finetune_days, (t_hist + 23) / 24);
}

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Normalized model inputs for the window whose forecast starts at `start`.
bnn::WindowInputs make_window(const EpisodeRecord& r, std::size_t start, const bnn::ModelShape& shape,
                              const bnn::Normalization& norm) {
    bnn::WindowInputs w;
    w.hist_symptoms.resize(shape.t_hist, 2);
    w.combined_inputs.resize(shape.t_hist + shape.t_fut, 2);
    const std::size_t first = start - static_cast<std::size_t>(shape.t_hist);
    for (int t = 0; t < shape.t_hist + shape.t_fut; ++t) {
        const std::size_t i = first + static_cast<std::size_t>(t);
        w.combined_inputs(t, 0) = r.meal[i] / norm.meal_scale;
        w.combined_inputs(t, 1) = r.dose[i] / norm.dose_scale;
        if (t < shape.t_hist) {
            w.hist_symptoms(t, 0) = bnn::normalize_symptom(r.reflux[i]);
            w.hist_symptoms(t, 1) = bnn::normalize_symptom(r.digestion[i]);
        }
    }
    return w;
}

mpc::SymptomHistory last_hours(const EpisodeRecord& r, int t_hist) {
    if (r.size() < static_cast<std::size_t>(t_hist))
        throw ShapeError("history has " + std::to_string(r.size()) + " hours, need " + std::to_string(t_hist));
    const std::size_t first = r.size() - static_cast<std::size_t>(t_hist);
    mpc::SymptomHistory h;
    h.symptoms.resize(t_hist, 2);
    for (int t = 0; t < t_hist; ++t) {
        h.symptoms(t, 0) = r.reflux[first + static_cast<std::size_t>(t)];
        h.symptoms(t, 1) = r.digestion[first + static_cast<std::size_t>(t)];
    }
    h.meals.assign(r.meal.begin() + static_cast<std::ptrdiff_t>(first), r.meal.end());
    h.doses.assign(r.dose.begin() + static_cast<std::ptrdiff_t>(first), r.dose.end());
    return h;
}

}  // namespace

// ---- test patients -----------------------------------------------------------------

TestPatient make_test_patient(const Config& config, std::uint64_t seed, int index) {
    const auto idx = static_cast<std::uint64_t>(index);
    const auto& h = config.harness;
    TestPatient tp;
    tp.id = index;
    tp.params = sample_patient(derive_seed(seed, "test-patient", idx), config.sim);
    const int days = history_days(config);
    Rng meal_rng = make_rng(seed, "test-history-meals", idx);
    Rng dose_rng = make_rng(seed, "test-history-doses", idx);
    Rng noise_rng = make_rng(seed, "test-history-noise", idx);
    const auto meals = hourly_profile(sample_pulses(0, days, meal_rng, config.meals), 0, days * 24);
    const auto doses = random_dose_schedule(days, h.u_max, h.dose_block_min, h.dose_block_max, config.mpc.dose_hour, dose_rng);
    tp.state = resting_state(tp.params);
    tp.history = simulate_record(index, tp.params, meals, doses, tp.state, noise_rng, 0, h.sub_step);
    return tp;
}

bnn::TrainResult finetune_for_patient(const bnn::ModelWeights& foundation, const TestPatient& patient,
                                      const Config& config, std::uint64_t seed) {
    std::vector<bnn::WindowSample> windows;
    if (config.harness.finetune_days > 0) {
        // only the most recent finetune_days of history are fine-tuning data
        EpisodeRecord recent = patient.history;
        const std::size_t keep = static_cast<std::size_t>(config.harness.finetune_days) * 24;
        if (recent.size() > keep) {
            const auto drop = static_cast<std::ptrdiff_t>(recent.size() - keep);
            for (auto* v : {&recent.t_hours, &recent.meal, &recent.dose, &recent.acid}) v->erase(v->begin(), v->begin() + drop);
            for (auto* v : {&recent.reflux, &recent.digestion}) v->erase(v->begin(), v->begin() + drop);
        }
        windows = extract_windows(recent, foundation.shape, foundation.norm, config.harness.window_stride);
    }
    WindowSplit split = temporal_split(std::move(windows), config.bnn.validation_fraction);
    Rng rng = make_rng(seed, "finetune", static_cast<std::uint64_t>(patient.id));
    return bnn::finetune(foundation, split.train, split.validation, config.bnn.finetune, rng);
}

// ---- open loop -----------------------------------------------------------------------

double rmse(std::span<const double> prediction, std::span<const double> truth) {
    if (prediction.size() != truth.size())
        throw ShapeError("rmse inputs differ in length: " + std::to_string(prediction.size()) + " vs " +
                         std::to_string(truth.size()));
    if (prediction.empty()) throw DomainError("rmse of an empty series");
    double s = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) s += (prediction[i] - truth[i]) * (prediction[i] - truth[i]);
    return std::sqrt(s / static_cast<double>(truth.size()));
}

Eigen::MatrixXd noise_channel_expectation(std::span<const double> acid, const PatientParams& p, int samples, Rng& rng) {
    if (samples < 1) throw ConfigError("noise floor needs at least one sample");
    Eigen::MatrixXd out(static_cast<Eigen::Index>(acid.size()), 2);
    for (std::size_t h = 0; h < acid.size(); ++h) {
        double sr = 0.0, sd = 0.0;
        for (int k = 0; k < samples; ++k) {
            const SymptomPair s = encode_symptoms(acid[h], p, rng);
            sr += s.reflux;
            sd += s.digestion;
        }
        out(static_cast<Eigen::Index>(h), 0) = sr / samples;
        out(static_cast<Eigen::Index>(h), 1) = sd / samples;
    }
    return out;
}

OpenLoopResult run_open_loop_validation(const bnn::ModelWeights& weights, const TestPatient& patient, int n_days,
                                        const Config& config, std::uint64_t seed) {
    const auto& shape = weights.shape;
    const int hours = n_days * 24;
    if (hours < shape.t_fut)
        throw ConfigError("open-loop evaluation needs at least " + std::to_string(shape.t_fut) + " hours");
    if (patient.history.size() < static_cast<std::size_t>(shape.t_hist))
        throw ShapeError("patient history shorter than T_hist");
    const auto idx = static_cast<std::uint64_t>(patient.id);
    const auto& h = config.harness;
    const int first_day = static_cast<int>(patient.history.size() / 24);
    Rng meal_rng = make_rng(seed, "openloop-meals", idx);
    Rng dose_rng = make_rng(seed, "openloop-doses", idx);
    Rng noise_rng = make_rng(seed, "openloop-noise", idx);
    Rng mc_rng = make_rng(seed, "openloop-mc", idx);
    Rng floor_rng = make_rng(seed, "openloop-floor", idx);
    const auto meals = hourly_profile(sample_pulses(first_day, n_days, meal_rng, config.meals), first_day * 24, hours);
    const auto doses = random_dose_schedule(n_days, h.u_max, h.dose_block_min, h.dose_block_max, config.mpc.dose_hour, dose_rng);
    SimState state = patient.state;

    OpenLoopResult res;
    res.record = simulate_record(patient.id, patient.params, meals, doses, state, noise_rng,
                                 static_cast<int>(patient.history.size()), h.sub_step);
    EpisodeRecord full = patient.history;
    full.append(res.record);

    const int blocks = hours / shape.t_fut;
    const int covered = blocks * shape.t_fut;
    res.prediction.resize(covered, 2);
    res.sigma.resize(covered, 2);
    for (int b = 0; b < blocks; ++b) {
        const std::size_t start = patient.history.size() + static_cast<std::size_t>(b * shape.t_fut);
        const bnn::WindowInputs w = make_window(full, start, shape, weights.norm);
        const Eigen::MatrixXd mean = bnn::forward(weights, w);
        const bnn::ForecastDistribution dist = bnn::predict_mc(weights, w, config.mpc.mc_passes, mc_rng);
        for (int t = 0; t < shape.t_fut; ++t)
            for (int c = 0; c < 2; ++c) {
                res.prediction(b * shape.t_fut + t, c) = bnn::denormalize_symptom(mean(t, c));
                res.sigma(b * shape.t_fut + t, c) = dist.sigma(t, c);
            }
    }
    const std::span<const double> acid(res.record.acid.data(), static_cast<std::size_t>(covered));
    res.oracle = noise_channel_expectation(acid, patient.params, h.noise_floor_samples, floor_rng);

    std::vector<double> truth_r(res.record.reflux.begin(), res.record.reflux.begin() + covered);
    std::vector<double> truth_d(res.record.digestion.begin(), res.record.digestion.begin() + covered);
    auto col = [](const Eigen::MatrixXd& m, int c) {
        std::vector<double> v(static_cast<std::size_t>(m.rows()));
        for (Eigen::Index i = 0; i < m.rows(); ++i) v[static_cast<std::size_t>(i)] = m(i, c);
        return v;
    };
    res.rmse_reflux = rmse(col(res.prediction, 0), truth_r);
    res.rmse_digestion = rmse(col(res.prediction, 1), truth_d);
    res.floor_reflux = rmse(col(res.oracle, 0), truth_r);
    res.floor_digestion = rmse(col(res.oracle, 1), truth_d);
    return res;
}

void write_open_loop_csv(const OpenLoopResult& r, std::ostream& out) {
    out << "t_hours,meal,dose,reflux,digestion,pred_reflux,pred_digestion,sigma_reflux,sigma_digestion,"
           "oracle_reflux,oracle_digestion\n";
    for (Eigen::Index i = 0; i < r.prediction.rows(); ++i) {
        const auto k = static_cast<std::size_t>(i);
        out << fmt_double(r.record.t_hours[k]) << ',' << fmt_double(r.record.meal[k]) << ','
            << fmt_double(r.record.dose[k]) << ',' << r.record.reflux[k] << ',' << r.record.digestion[k] << ','
            << fmt_double(r.prediction(i, 0)) << ',' << fmt_double(r.prediction(i, 1)) << ','
            << fmt_double(r.sigma(i, 0)) << ',' << fmt_double(r.sigma(i, 1)) << ',' << fmt_double(r.oracle(i, 0))
            << ',' << fmt_double(r.oracle(i, 1)) << '\n';
    }
}

// ---- closed loop ------------------------------------------------------------------------

void score_arm(ArmResult& arm, double theta) {
    const EpisodeRecord& r = arm.record;
    r.validate();
    arm.violations.clear();
    if (r.size() == 0) {
        arm.sat_reflux = arm.sat_digestion = arm.sat_joint = 1.0;
        return;
    }
    std::size_t ok_r = 0, ok_d = 0, ok_j = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        const bool a = r.reflux[i] <= theta, b = r.digestion[i] <= theta;
        ok_r += a;
        ok_d += b;
        ok_j += a && b;
    }
    const double n = static_cast<double>(r.size());
    arm.sat_reflux = static_cast<double>(ok_r) / n;
    arm.sat_digestion = static_cast<double>(ok_d) / n;
    arm.sat_joint = static_cast<double>(ok_j) / n;
    for (const auto& [name, series] : {std::pair<std::string, const std::vector<int>*>{"reflux", &r.reflux},
                                       std::pair<std::string, const std::vector<int>*>{"digestion", &r.digestion}}) {
        std::size_t i = 0;
        while (i < series->size()) {
            if ((*series)[i] <= theta) {
                ++i;
                continue;
            }
            std::size_t j = i;
            while (j < series->size() && (*series)[j] > theta) ++j;
            arm.violations.push_back({name, static_cast<int>(std::lround(r.t_hours[i])), static_cast<int>(j - i)});
            i = j;
        }
    }
}

std::vector<double> evaluation_meals(const Config& config, std::uint64_t seed, const TestPatient& patient, int n_days) {
    Rng rng = make_rng(seed, "eval-meals", static_cast<std::uint64_t>(patient.id));
    const int first_day = static_cast<int>(patient.history.size() / 24);
    return hourly_profile(sample_pulses(first_day, n_days, rng, config.meals), first_day * 24, n_days * 24);
}

ClosedLoopResult run_closed_loop(mpc::SymptomPredictor& predictor, const TestPatient& patient, int n_days,
                                 const mpc::MpcConfig& mpc_config, const Config& config, std::uint64_t seed) {
    if (n_days < 1) throw ConfigError("closed loop needs at least one day");
    mpc_config.validate();
    const auto idx = static_cast<std::uint64_t>(patient.id);
    const auto meals = evaluation_meals(config, seed, patient, n_days);
    Rng noise_rng = make_rng(seed, "eval-noise", idx);
    Rng scenario_rng = make_rng(seed, "mpc-scenarios", idx);
    const MealBounds meal_bounds = config.meals;
    mpc::ScenarioSampler sampler = [&scenario_rng, meal_bounds](int count, int horizon) {
        return sample_scenarios(count, horizon, scenario_rng, meal_bounds);
    };

    ClosedLoopResult out;
    out.arm.record.patient_id = patient.id;
    EpisodeRecord past = patient.history;
    SimState state = patient.state;
    double current = config.harness.initial_dose;
    const int t_hist = config.bnn.shape.t_hist;
    const int first_hour = static_cast<int>(patient.history.size());
    for (int day = 0; day < n_days; ++day) {
        mpc::MpcDecision d;
        try {
            d = mpc::solve(last_hours(past, t_hist), predictor, sampler, current, mpc_config);
        } catch (const Error& e) {
            throw Error(e.kind(), "closed loop aborted on day " + std::to_string(day) + ": " + e.what());
        }
        const std::span<const double> day_meals(meals.data() + day * 24, 24);
        const EpisodeRecord rec = simulate_record(patient.id, patient.params, day_meals, d.next_hours, state,
                                                  noise_rng, first_hour + day * 24, config.harness.sub_step);
        past.append(rec);
        out.arm.record.append(rec);
        out.arm.daily_doses.push_back(d.dose);
        out.arm.usage += d.dose;
        out.decisions.push_back({day, d.dose, d.best.action_string(), d.best.score, d.best.worst_violation,
                                 d.best.mean_sigma, d.best.indicator_fraction});
        current = d.dose;
    }
    score_arm(out.arm, mpc_config.theta);
    return out;
}

ClosedLoopResult run_closed_loop(const bnn::ModelWeights& weights, const TestPatient& patient, int n_days,
                                 const mpc::MpcConfig& mpc_config, const Config& config, std::uint64_t seed) {
    mpc::BnnPredictor predictor(weights, mpc_config.mc_passes,
                                derive_seed(seed, "mpc-dropout", static_cast<std::uint64_t>(patient.id)));
    return run_closed_loop(predictor, patient, n_days, mpc_config, config, seed);
}

ArmResult run_fixed_regimen(const TestPatient& patient, double daily_dose, int n_days, const Config& config,
                            std::uint64_t seed) {
    if (n_days < 1) throw ConfigError("fixed regimen needs at least one day");
    if (!(daily_dose >= 0.0)) throw DomainError("fixed daily dose must be non-negative");
    const auto meals = evaluation_meals(config, seed, patient, n_days);
    const auto doses = fixed_regimen_schedule(daily_dose, n_days);
    Rng noise_rng = make_rng(seed, "eval-noise", static_cast<std::uint64_t>(patient.id));
    SimState state = patient.state;
    ArmResult arm;
    arm.record = simulate_record(patient.id, patient.params, meals, doses, state, noise_rng,
                                 static_cast<int>(patient.history.size()), config.harness.sub_step);
    arm.daily_doses.assign(static_cast<std::size_t>(n_days), daily_dose);
    arm.usage = daily_dose * n_days;
    score_arm(arm, config.mpc.theta);
    return arm;
}

Calibration calibrate_fixed_regimen(const Config& config, std::uint64_t seed) {
    const auto& h = config.harness;
    if (h.baseline_grid.empty()) throw ConfigError("baseline grid is empty");
    if (h.calibration_patients < 1 || h.calibration_days < 1) throw ConfigError("calibration needs patients and days");
    Calibration cal;
    cal.grid = h.baseline_grid;
    std::sort(cal.grid.begin(), cal.grid.end());
    const int total_days = h.calibration_warmup_days + h.calibration_days;
    const std::size_t skip = static_cast<std::size_t>(h.calibration_warmup_days) * 24;
    for (int i = 0; i < h.calibration_patients; ++i) {
        const auto idx = static_cast<std::uint64_t>(i);
        const PatientParams p = sample_patient(derive_seed(seed, "calibration-patient", idx), config.sim);
        Rng meal_rng = make_rng(seed, "calibration-meals", idx);
        const auto meals = hourly_profile(sample_pulses(0, total_days, meal_rng, config.meals), 0, total_days * 24);
        std::vector<double> sats;
        double need = cal.grid.back();
        bool reached = false;
        for (double dose : cal.grid) {
            Rng noise_rng = make_rng(seed, "calibration-noise", idx);
            SimState state = resting_state(p);
            const auto doses = fixed_regimen_schedule(dose, total_days);
            const EpisodeRecord r = simulate_record(i, p, meals, doses, state, noise_rng, 0, h.sub_step);
            std::size_t ok = 0;
            for (std::size_t k = skip; k < r.size(); ++k)
                ok += r.reflux[k] <= config.mpc.theta && r.digestion[k] <= config.mpc.theta;
            const double sat = static_cast<double>(ok) / static_cast<double>(r.size() - skip);
            sats.push_back(sat);
            if (!reached && sat >= h.satisfaction_target) {
                reached = true;
                need = dose;
            }
        }
        cal.satisfaction.push_back(std::move(sats));
        cal.requirement.push_back(need);
        cal.reachable.push_back(reached);
        cal.all_reachable = cal.all_reachable && reached;
    }
    std::vector<double> sorted = cal.requirement;
    std::sort(sorted.begin(), sorted.end());
    const auto n = static_cast<double>(sorted.size());
    const auto rank = static_cast<std::size_t>(std::max(1.0, std::ceil(h.baseline_percentile * n)));
    cal.dose = sorted[std::min(rank, sorted.size()) - 1];
    return cal;
}

// ---- reports -----------------------------------------------------------------------------------

BenchmarkSummary evaluate(const BenchmarkReport& report) {
    if (report.patients.empty()) throw EvaluationError("report has no patients");
    BenchmarkSummary s;
    double red = 0.0;
    s.min_satisfaction_pct = 100.0;
    s.min_fixed_satisfaction_pct = 100.0;
    for (const auto& p : report.patients) {
        if (!p.mpc || !p.fixed)
            throw EvaluationError("patient " + std::to_string(p.patient_id) + " is missing the " +
                                  (p.mpc ? "fixed" : "mpc") + " arm");
        if (p.fixed->usage <= 0.0) {
            if (p.mpc->usage > 0.0)
                throw EvaluationError("patient " + std::to_string(p.patient_id) + " has zero fixed usage");
        } else {
            red += 1.0 - p.mpc->usage / p.fixed->usage;
        }
        s.min_satisfaction_pct = std::min({s.min_satisfaction_pct, 100.0 * p.mpc->sat_reflux, 100.0 * p.mpc->sat_digestion});
        s.min_fixed_satisfaction_pct =
            std::min({s.min_fixed_satisfaction_pct, 100.0 * p.fixed->sat_reflux, 100.0 * p.fixed->sat_digestion});
    }
    s.patients = static_cast<int>(report.patients.size());
    s.mean_reduction_pct = 100.0 * red / s.patients;
    return s;
}

namespace {

json arm_json(const ArmResult& a) {
    json v = json::array();
    for (const auto& e : a.violations) v.push_back({{"symptom", e.symptom}, {"start_hour", e.start_hour}, {"length", e.length}});
    return {{"usage", a.usage},
            {"sat_reflux", a.sat_reflux},
            {"sat_digestion", a.sat_digestion},
            {"sat_joint", a.sat_joint},
            {"daily_doses", a.daily_doses},
            {"violations", v}};
}

ArmResult arm_from_json(const json& j) {
    ArmResult a;
    a.usage = j.at("usage").get<double>();
    a.sat_reflux = j.at("sat_reflux").get<double>();
    a.sat_digestion = j.at("sat_digestion").get<double>();
    a.sat_joint = j.at("sat_joint").get<double>();
    a.daily_doses = j.at("daily_doses").get<std::vector<double>>();
    for (const auto& e : j.at("violations"))
        a.violations.push_back({e.at("symptom").get<std::string>(), e.at("start_hour").get<int>(), e.at("length").get<int>()});
    if (a.usage < 0.0) throw IoError("report usage is negative");
    for (double f : {a.sat_reflux, a.sat_digestion, a.sat_joint})
        if (!(f >= 0.0 && f <= 1.0)) throw IoError("report satisfaction fraction outside [0, 1]");
    return a;
}

}  // namespace

std::string report_to_json(const BenchmarkReport& report, const BenchmarkSummary* summary) {
    json j;
    j["fixed_dose"] = report.fixed_dose;
    j["theta"] = report.theta;
    json rows = json::array();
    for (const auto& p : report.patients) {
        json row;
        row["patient_id"] = p.patient_id;
        row["rmse_reflux"] = p.rmse_reflux;
        row["rmse_digestion"] = p.rmse_digestion;
        row["mpc"] = p.mpc ? arm_json(*p.mpc) : json(nullptr);
        row["fixed"] = p.fixed ? arm_json(*p.fixed) : json(nullptr);
        rows.push_back(row);
    }
    j["patients"] = rows;
    if (summary)
        j["summary"] = {{"mean_reduction_pct", summary->mean_reduction_pct},
                        {"min_satisfaction_pct", summary->min_satisfaction_pct},
                        {"min_fixed_satisfaction_pct", summary->min_fixed_satisfaction_pct},
                        {"patients", summary->patients}};
    return j.dump(2) + "\n";
}

std::string report_to_csv(const BenchmarkReport& report) {
    std::ostringstream out;
    out << "patient_id,arm,usage,sat_reflux,sat_digestion,sat_joint,violation_episodes,rmse_reflux,rmse_digestion\n";
    for (const auto& p : report.patients)
        for (const auto& [name, arm] : {std::pair<const char*, const std::optional<ArmResult>*>{"mpc", &p.mpc},
                                        std::pair<const char*, const std::optional<ArmResult>*>{"fixed", &p.fixed}}) {
            if (!*arm) continue;
            const ArmResult& a = **arm;
            out << p.patient_id << ',' << name << ',' << fmt_double(a.usage) << ',' << fmt_double(a.sat_reflux) << ','
                << fmt_double(a.sat_digestion) << ',' << fmt_double(a.sat_joint) << ',' << a.violations.size() << ','
                << fmt_double(p.rmse_reflux) << ',' << fmt_double(p.rmse_digestion) << '\n';
        }
    return out.str();
}

BenchmarkReport report_from_json(const std::string& text) {
    BenchmarkReport r;
    try {
        const json j = json::parse(text);
        r.fixed_dose = j.at("fixed_dose").get<double>();
        r.theta = j.at("theta").get<double>();
        for (const auto& row : j.at("patients")) {
            PatientReport p;
            p.patient_id = row.at("patient_id").get<int>();
            p.rmse_reflux = row.at("rmse_reflux").get<double>();
            p.rmse_digestion = row.at("rmse_digestion").get<double>();
            if (!row.at("mpc").is_null()) p.mpc = arm_from_json(row.at("mpc"));
            if (!row.at("fixed").is_null()) p.fixed = arm_from_json(row.at("fixed"));
            r.patients.push_back(std::move(p));
        }
    } catch (const json::exception& e) {
        throw IoError(std::string("malformed report: ") + e.what());
    }
    return r;
}

BenchmarkReport merge_reports(std::span<const BenchmarkReport> parts) {
    BenchmarkReport out;
    std::map<int, PatientReport> rows;
    for (const auto& part : parts) {
        if (part.fixed_dose > 0.0) out.fixed_dose = part.fixed_dose;
        if (part.theta > 0.0) out.theta = part.theta;
        for (const auto& p : part.patients) {
            auto [it, inserted] = rows.try_emplace(p.patient_id, p);
            if (inserted) continue;
            PatientReport& dst = it->second;
            if (p.mpc) dst.mpc = p.mpc;
            if (p.fixed) dst.fixed = p.fixed;
            if (p.rmse_reflux >= 0.0) dst.rmse_reflux = p.rmse_reflux;
            if (p.rmse_digestion >= 0.0) dst.rmse_digestion = p.rmse_digestion;
        }
    }
    for (auto& [id, p] : rows) out.patients.push_back(std::move(p));
    return out;
}

void write_arm_trace_csv(const ArmResult& arm, std::ostream& out, bool include_hidden) {
    write_episode_csv(arm.record, out, include_hidden);
}

}  // namespace gmpc
