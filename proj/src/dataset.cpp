#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gmpc/error.hpp"
#include "gmpc/harness.hpp"
#include "gmpc/symptoms.hpp"
#include "json.hpp"

namespace gmpc {

namespace fs = std::filesystem;
using nlohmann::json;

void EpisodeRecord::validate() const {
    const std::size_t n = t_hours.size();
    if (meal.size() != n || dose.size() != n || reflux.size() != n || digestion.size() != n ||
        (!acid.empty() && acid.size() != n))
        throw ShapeError("episode record columns have unequal lengths");
}

void EpisodeRecord::append(const EpisodeRecord& o) {
    t_hours.insert(t_hours.end(), o.t_hours.begin(), o.t_hours.end());
    meal.insert(meal.end(), o.meal.begin(), o.meal.end());
    dose.insert(dose.end(), o.dose.begin(), o.dose.end());
    reflux.insert(reflux.end(), o.reflux.begin(), o.reflux.end());
    digestion.insert(digestion.end(), o.digestion.begin(), o.digestion.end());
    acid.insert(acid.end(), o.acid.begin(), o.acid.end());
}

std::vector<double> random_dose_schedule(int n_days, double u_max, int block_min, int block_max, int dose_hour,
                                         Rng& rng) {
    if (block_min < 1 || block_max < block_min) throw ConfigError("invalid dose block lengths");
    if (dose_hour < 0 || dose_hour > 23) throw ConfigError("dose hour must lie in [0, 23]");
    std::vector<double> hourly(static_cast<std::size_t>(std::max(n_days, 0)) * 24, 0.0);
    int day = 0;
    while (day < n_days) {
        const int len = uniform_int(rng, block_min, block_max);
        const double level = uniform(rng, 0.0, u_max);
        for (int d = day; d < std::min(day + len, n_days); ++d) hourly[static_cast<std::size_t>(d) * 24 + static_cast<std::size_t>(dose_hour)] = level;
        day += len;
    }
    return hourly;
}

std::vector<double> fixed_regimen_schedule(double daily_dose, int n_days) {
    std::vector<double> hourly(static_cast<std::size_t>(std::max(n_days, 0)) * 24, 0.0);
    for (int d = 0; d < n_days; ++d) {
        hourly[static_cast<std::size_t>(d) * 24 + 8] = 0.5 * daily_dose;
        hourly[static_cast<std::size_t>(d) * 24 + 18] = 0.5 * daily_dose;
    }
    return hourly;
}

EpisodeRecord simulate_record(int patient_id, const PatientParams& params, std::span<const double> meals,
                              std::span<const double> doses, SimState& state, Rng& noise_rng, int first_hour,
                              double dt_sub) {
    EpisodeRecord r;
    r.patient_id = patient_id;
    r.acid = simulate_episode(params, meals, doses, dt_sub, state);
    r.meal.assign(meals.begin(), meals.end());
    r.dose.assign(doses.begin(), doses.end());
    r.t_hours.reserve(meals.size());
    r.reflux.reserve(meals.size());
    r.digestion.reserve(meals.size());
    for (std::size_t h = 0; h < meals.size(); ++h) {
        r.t_hours.push_back(static_cast<double>(first_hour) + static_cast<double>(h));
        const SymptomPair s = encode_symptoms(r.acid[h], params, noise_rng);
        r.reflux.push_back(s.reflux);
        r.digestion.push_back(s.digestion);
    }
    return r;
}

bnn::Normalization normalization_for(std::span<const EpisodeRecord> episodes, double u_max) {
    double meal_max = 0.0;
    for (const auto& e : episodes)
        for (double m : e.meal) meal_max = std::max(meal_max, m);
    bnn::Normalization n;
    n.meal_scale = meal_max > 0.0 ? meal_max : 1.0;
    n.dose_scale = u_max;
    return n;
}

std::vector<bnn::WindowSample> extract_windows(const EpisodeRecord& record, const bnn::ModelShape& shape,
                                               const bnn::Normalization& norm, int stride) {
    if (stride < 1) throw ConfigError("window stride must be positive");
    const std::size_t span_len = static_cast<std::size_t>(shape.t_hist + shape.t_fut);
    const std::size_t n = record.meal.size();
    if (record.dose.size() != n || record.reflux.size() != n || record.digestion.size() != n)
        throw ShapeError("episode record columns have unequal lengths");
    std::vector<bnn::WindowSample> out;
    for (std::size_t s = 0; s + span_len <= n; s += static_cast<std::size_t>(stride)) {
        bnn::WindowSample w;
        w.hist_symptoms.resize(shape.t_hist, 2);
        w.combined_inputs.resize(static_cast<Eigen::Index>(span_len), 2);
        w.target.resize(shape.t_fut, 2);
        for (std::size_t t = 0; t < span_len; ++t) {
            const auto row = static_cast<Eigen::Index>(t);
            w.combined_inputs(row, 0) = record.meal[s + t] / norm.meal_scale;
            w.combined_inputs(row, 1) = record.dose[s + t] / norm.dose_scale;
            const double r = bnn::normalize_symptom(record.reflux[s + t]);
            const double d = bnn::normalize_symptom(record.digestion[s + t]);
            if (t < static_cast<std::size_t>(shape.t_hist)) {
                w.hist_symptoms(row, 0) = r;
                w.hist_symptoms(row, 1) = d;
            } else {
                w.target(row - shape.t_hist, 0) = r;
                w.target(row - shape.t_hist, 1) = d;
            }
        }
        out.push_back(std::move(w));
    }
    return out;
}

WindowSplit temporal_split(std::vector<bnn::WindowSample> windows, double fraction) {
    WindowSplit split;
    const std::size_t n = windows.size();
    std::size_t n_val = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
    if (fraction > 0.0 && n >= 2 && n_val == 0) n_val = 1;
    const std::size_t n_train = n - n_val;
    split.train.assign(std::make_move_iterator(windows.begin()),
                       std::make_move_iterator(windows.begin() + static_cast<std::ptrdiff_t>(n_train)));
    split.validation.assign(std::make_move_iterator(windows.begin() + static_cast<std::ptrdiff_t>(n_train)),
                            std::make_move_iterator(windows.end()));
    return split;
}

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& s, std::size_t line) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') throw IoError("bad number '" + s + "' on CSV line " + std::to_string(line));
    return v;
}

}  // namespace

void write_episode_csv(const EpisodeRecord& r, std::ostream& out, bool include_hidden) {
    r.validate();
    out << "t_hours,meal,dose,reflux,digestion";
    if (include_hidden) out << ",acid";
    out << '\n';
    for (std::size_t i = 0; i < r.size(); ++i) {
        out << fmt_double(r.t_hours[i]) << ',' << fmt_double(r.meal[i]) << ',' << fmt_double(r.dose[i]) << ','
            << r.reflux[i] << ',' << r.digestion[i];
        if (include_hidden) out << ',' << (r.acid.empty() ? std::string("nan") : fmt_double(r.acid[i]));
        out << '\n';
    }
}

EpisodeRecord read_episode_csv(std::istream& in, int patient_id) {
    EpisodeRecord r;
    r.patient_id = patient_id;
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty episode CSV");
    bool has_acid = false;
    if (line == "t_hours,meal,dose,reflux,digestion,acid")
        has_acid = true;
    else if (line != "t_hours,meal,dose,reflux,digestion")
        throw IoError("unexpected episode CSV header '" + line + "'");
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != (has_acid ? 6u : 5u)) throw IoError("wrong column count on CSV line " + std::to_string(lineno));
        r.t_hours.push_back(parse_double(cells[0], lineno));
        r.meal.push_back(parse_double(cells[1], lineno));
        r.dose.push_back(parse_double(cells[2], lineno));
        r.reflux.push_back(static_cast<int>(parse_double(cells[3], lineno)));
        r.digestion.push_back(static_cast<int>(parse_double(cells[4], lineno)));
        if (has_acid) r.acid.push_back(parse_double(cells[5], lineno));
    }
    return r;
}

// ---- foundation dataset ------------------------------------------------------------

FoundationDataset generate_foundation_dataset(const Config& config, int n_patients, int n_days, std::uint64_t seed) {
    const auto& shape = config.bnn.shape;
    if (n_patients < 1) throw ConfigError("foundation dataset needs at least one patient");
    if (n_days * 24 < shape.t_hist + shape.t_fut)
        throw ConfigError("foundation days too short: need at least " +
                          std::to_string((shape.t_hist + shape.t_fut + 23) / 24) + " days for one window");
    const auto& h = config.harness;
    FoundationDataset data;
    data.seed = seed;
    data.n_days = n_days;
    for (int i = 0; i < n_patients; ++i) {
        const auto idx = static_cast<std::uint64_t>(i);
        const PatientParams p = sample_patient(derive_seed(seed, "foundation-patient", idx), config.sim);
        Rng meal_rng = make_rng(seed, "foundation-meals", idx);
        Rng dose_rng = make_rng(seed, "foundation-doses", idx);
        Rng noise_rng = make_rng(seed, "foundation-noise", idx);
        const auto pulses = sample_pulses(0, n_days, meal_rng, config.meals);
        const auto meals = hourly_profile(pulses, 0, n_days * 24);
        const auto doses = random_dose_schedule(n_days, h.u_max, h.dose_block_min, h.dose_block_max, config.mpc.dose_hour, dose_rng);
        SimState state = resting_state(p);
        data.patients.push_back(p);
        data.episodes.push_back(simulate_record(i, p, meals, doses, state, noise_rng, 0, h.sub_step));
    }
    data.norm = normalization_for(data.episodes, h.u_max);
    for (const auto& e : data.episodes) {
        WindowSplit s = temporal_split(extract_windows(e, shape, data.norm, h.window_stride),
                                       config.bnn.validation_fraction);
        std::move(s.train.begin(), s.train.end(), std::back_inserter(data.windows.train));
        std::move(s.validation.begin(), s.validation.end(), std::back_inserter(data.windows.validation));
    }
    return data;
}

namespace {

std::string episode_file(int id) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "patient_%03d.csv", id);
    return buf;
}

json params_json(const PatientParams& p) {
    return {{"k_e", p.k_e},       {"k_bind", p.k_bind}, {"k_rec", p.k_rec}, {"s0", p.s0},
            {"s_meal", p.s_meal}, {"k_A", p.k_A},       {"a_high", p.a_high}, {"a_low", p.a_low},
            {"k_r", p.k_r},       {"k_d", p.k_d},       {"eta_r", p.eta_r}, {"eta_d", p.eta_d},
            {"sigma_noise", p.sigma_noise}};
}

}  // namespace

void write_dataset(const FoundationDataset& data, const Config& config, const std::string& dir, bool include_hidden) {
    fs::create_directories(fs::path(dir) / "episodes");
    json header;
    header["format"] = "gmpc-dataset";
    header["version"] = 1;
    header["seed"] = data.seed;
    header["n_patients"] = data.episodes.size();
    header["n_days"] = data.n_days;
    header["t_hist"] = config.bnn.shape.t_hist;
    header["t_fut"] = config.bnn.shape.t_fut;
    header["window_stride"] = config.harness.window_stride;
    header["normalization"] = {{"meal_scale", data.norm.meal_scale}, {"dose_scale", data.norm.dose_scale}};
    header["includes_hidden"] = include_hidden;
    json files = json::array();
    json params = json::array();
    for (std::size_t i = 0; i < data.episodes.size(); ++i) {
        const std::string name = episode_file(data.episodes[i].patient_id);
        files.push_back("episodes/" + name);
        if (include_hidden) params.push_back(params_json(data.patients[i]));
        std::ofstream out(fs::path(dir) / "episodes" / name);
        if (!out) throw IoError("cannot write episode file " + name);
        write_episode_csv(data.episodes[i], out, include_hidden);
    }
    header["episodes"] = files;
    if (include_hidden) header["hidden_patient_params"] = params;
    std::ofstream out(fs::path(dir) / "dataset.json");
    if (!out) throw IoError("cannot write dataset.json in " + dir);
    out << header.dump(2) << '\n';
}

FoundationDataset read_dataset(const std::string& dir, const Config& config) {
    std::ifstream in(fs::path(dir) / "dataset.json");
    if (!in) throw IoError("cannot open dataset.json in " + dir);
    json header;
    try {
        header = json::parse(in);
    } catch (const json::exception& e) {
        throw IoError(std::string("dataset.json is malformed: ") + e.what());
    }
    if (header.value("format", "") != "gmpc-dataset") throw IoError("dataset.json has the wrong format tag");
    const auto& shape = config.bnn.shape;
    if (header.at("t_hist").get<int>() != shape.t_hist || header.at("t_fut").get<int>() != shape.t_fut)
        throw ConfigError("dataset window lengths do not match the bnn configuration");
    FoundationDataset data;
    data.seed = header.at("seed").get<std::uint64_t>();
    data.n_days = header.at("n_days").get<int>();
    data.norm.meal_scale = header.at("normalization").at("meal_scale").get<double>();
    data.norm.dose_scale = header.at("normalization").at("dose_scale").get<double>();
    const int stride = header.at("window_stride").get<int>();
    int id = 0;
    for (const auto& f : header.at("episodes")) {
        std::ifstream ep(fs::path(dir) / f.get<std::string>());
        if (!ep) throw IoError("cannot open episode " + f.get<std::string>());
        EpisodeRecord r = read_episode_csv(ep, id++);
        WindowSplit s = temporal_split(extract_windows(r, shape, data.norm, stride), config.bnn.validation_fraction);
        std::move(s.train.begin(), s.train.end(), std::back_inserter(data.windows.train));
        std::move(s.validation.begin(), s.validation.end(), std::back_inserter(data.windows.validation));
        data.episodes.push_back(std::move(r));
    }
    return data;
}

bnn::ModelWeights train_foundation(const FoundationDataset& data, const Config& config, std::uint64_t seed,
                                   bnn::TrainHistory* history) {
    Rng init_rng = make_rng(seed, "bnn-init");
    Rng train_rng = make_rng(seed, "bnn-train");
    const bnn::ModelWeights init = bnn::init_weights(config.bnn.shape, config.bnn.dropout, data.norm, init_rng);
    bnn::TrainResult r = bnn::train(init, data.windows.train, data.windows.validation, config.bnn.train, train_rng);
    if (history) *history = r.history;
    return r.weights;
}

}  // namespace gmpc
