#include "gmpc/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "gmpc/error.hpp"
#include "json.hpp"

namespace gmpc {

using nlohmann::json;

std::vector<double> HarnessSettings::default_grid() {
    std::vector<double> g;
    for (int i = 1; i <= 20; ++i) g.push_back(0.05 * i);
    return g;
}

void Config::validate() const {
    sim.validate();
    meals.validate();
    bnn.train.validate();
    bnn.finetune.validate();
    if (bnn.shape.hidden < 1 || bnn.shape.t_hist < 1 || bnn.shape.t_fut < 1)
        throw ConfigError("bnn dimensions must be positive");
    if (!(bnn.dropout >= 0.0 && bnn.dropout < 1.0)) throw ConfigError("bnn.dropout must lie in [0, 1)");
    if (!(bnn.validation_fraction >= 0.0 && bnn.validation_fraction < 1.0))
        throw ConfigError("bnn.validation_fraction must lie in [0, 1)");
    mpc.validate();
    if (mpc.horizon_days * 24 != bnn.shape.t_fut)
        throw ConfigError("mpc.horizon_days * 24 must equal bnn.t_fut");
    const HarnessSettings& h = harness;
    if (h.foundation_patients < 1 || h.test_patients < 1 || h.calibration_patients < 1)
        throw ConfigError("patient counts must be positive");
    if (h.window_stride < 1) throw ConfigError("harness.window_stride must be positive");
    if (!(h.u_max > 0.0 && h.u_max <= 1.0)) throw ConfigError("harness.u_max must lie in (0, 1]");
    if (h.dose_block_min < 1 || h.dose_block_max < h.dose_block_min) throw ConfigError("invalid dose block lengths");
    if (h.baseline_grid.empty()) throw ConfigError("harness.baseline_grid must not be empty");
    for (double g : h.baseline_grid)
        if (!(g >= 0.0 && g <= 1.0)) throw ConfigError("baseline grid doses must lie in [0, 1]");
    if (!(h.satisfaction_target > 0.0 && h.satisfaction_target <= 1.0))
        throw ConfigError("harness.satisfaction_target must lie in (0, 1]");
    if (!(h.baseline_percentile > 0.0 && h.baseline_percentile <= 1.0))
        throw ConfigError("harness.baseline_percentile must lie in (0, 1]");
    if (h.calibration_warmup_days < 0) throw ConfigError("harness.calibration_warmup_days must be non-negative");
    if (h.noise_floor_samples < 1) throw ConfigError("harness.noise_floor_samples must be positive");
}

namespace {

/// Reads known keys out of one JSON object and rejects anything else.
class Section {
public:
    Section(const json& root, std::string name) : name_(std::move(name)) {
        if (root.contains(name_)) {
            obj_ = &root.at(name_);
            if (!obj_->is_object()) throw ConfigError("config section '" + name_ + "' must be an object");
        }
    }

    Section(const json* obj, std::string name) : name_(std::move(name)), obj_(obj) {}

    template <class T>
    void read(const char* key, T& out) {
        seen_.insert(key);
        if (!obj_ || !obj_->contains(key)) return;
        try {
            out = obj_->at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError("config key '" + name_ + "." + key + "' has the wrong type");
        }
    }

    void read(const char* key, Range& out) {
        std::vector<double> v{out.lo, out.hi};
        read(key, v);
        if (v.size() != 2) throw ConfigError("config key '" + name_ + "." + key + "' must be [lo, hi]");
        out = {v[0], v[1]};
    }

    void read_train(const char* key, bnn::TrainConfig& t) {
        seen_.insert(key);
        if (!obj_ || !obj_->contains(key)) return;
        const json& o = obj_->at(key);
        if (!o.is_object()) throw ConfigError("config key '" + name_ + "." + key + "' must be an object");
        Section s(&o, name_ + "." + key);
        s.read("lr", t.learning_rate);
        s.read("momentum", t.momentum);
        s.read("weight_decay", t.weight_decay);
        s.read("batch", t.batch_size);
        s.read("max_epochs", t.max_epochs);
        s.read("patience", t.patience);
        s.read("plateau_epochs", t.plateau_epochs);
        s.read("lr_decay", t.lr_decay);
        s.read("grad_clip", t.grad_clip);
        s.finish();
    }

    void finish() const {
        if (!obj_) return;
        for (const auto& [k, v] : obj_->items())
            if (!seen_.count(k)) throw ConfigError("unknown config key '" + name_ + "." + k + "'");
    }

private:
    std::string name_;
    const json* obj_ = nullptr;
    std::set<std::string> seen_;
};

json range_json(const Range& r) { return json::array({r.lo, r.hi}); }

json train_json(const bnn::TrainConfig& t) {
    return {{"lr", t.learning_rate},      {"momentum", t.momentum},
            {"weight_decay", t.weight_decay}, {"batch", t.batch_size},
            {"max_epochs", t.max_epochs}, {"patience", t.patience},
            {"plateau_epochs", t.plateau_epochs}, {"lr_decay", t.lr_decay},
            {"grad_clip", t.grad_clip}};
}

}  // namespace

Config parse_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config root must be an object");
    static const std::set<std::string> sections{"sim", "meals", "bnn", "mpc", "harness"};
    for (const auto& [k, v] : root.items())
        if (!sections.count(k)) throw ConfigError("unknown config section '" + k + "'");

    Config c;
    {
        Section s(root, "sim");
        ParamBounds& b = c.sim;
        s.read("k_e", b.k_e);
        s.read("k_bind", b.k_bind);
        s.read("k_rec", b.k_rec);
        s.read("s0", b.s0);
        s.read("s_meal", b.s_meal);
        s.read("k_A", b.k_A);
        s.read("a_high", b.a_high);
        s.read("a_low", b.a_low);
        s.read("k_r", b.k_r);
        s.read("k_d", b.k_d);
        s.read("eta_r", b.eta_r);
        s.read("eta_d", b.eta_d);
        s.read("sigma_noise", b.sigma_noise);
        s.finish();
    }
    {
        Section s(root, "meals");
        s.read("breakfast_amplitude", c.meals.amplitude[0]);
        s.read("lunch_amplitude", c.meals.amplitude[1]);
        s.read("dinner_amplitude", c.meals.amplitude[2]);
        s.read("max_shift", c.meals.max_shift);
        s.read("spread", c.meals.spread);
        s.finish();
    }
    {
        Section s(root, "bnn");
        s.read("hidden", c.bnn.shape.hidden);
        s.read("t_hist", c.bnn.shape.t_hist);
        s.read("t_fut", c.bnn.shape.t_fut);
        s.read("dropout", c.bnn.dropout);
        s.read("validation_fraction", c.bnn.validation_fraction);
        s.read_train("train", c.bnn.train);
        s.read_train("finetune", c.bnn.finetune);
        s.finish();
    }
    {
        Section s(root, "mpc");
        s.read("theta", c.mpc.theta);
        s.read("p", c.mpc.confidence);
        s.read("lambda", c.mpc.lambda);
        s.read("c", c.mpc.dose_cost);
        s.read("T_days", c.mpc.horizon_days);
        s.read("J", c.mpc.scenarios);
        s.read("M", c.mpc.mc_passes);
        s.read("u_min", c.mpc.u_min);
        s.read("u_max", c.mpc.u_max);
        std::vector<double> factors(c.mpc.action_factors.begin(), c.mpc.action_factors.end());
        s.read("action_factors", factors);
        if (factors.size() != 3) throw ConfigError("mpc.action_factors must have three entries");
        std::copy(factors.begin(), factors.end(), c.mpc.action_factors.begin());
        s.read("enumeration_cap", c.mpc.enumeration_cap);
        s.read("dose_hour", c.mpc.dose_hour);
        s.finish();
    }
    {
        Section s(root, "harness");
        HarnessSettings& h = c.harness;
        s.read("foundation_patients", h.foundation_patients);
        s.read("foundation_days", h.foundation_days);
        s.read("test_patients", h.test_patients);
        s.read("finetune_days", h.finetune_days);
        s.read("validation_days", h.validation_days);
        s.read("closed_loop_days", h.closed_loop_days);
        s.read("calibration_patients", h.calibration_patients);
        s.read("calibration_days", h.calibration_days);
        s.read("calibration_warmup_days", h.calibration_warmup_days);
        s.read("window_stride", h.window_stride);
        s.read("u_max", h.u_max);
        s.read("dose_block_min", h.dose_block_min);
        s.read("dose_block_max", h.dose_block_max);
        s.read("baseline_grid", h.baseline_grid);
        s.read("satisfaction_target", h.satisfaction_target);
        s.read("baseline_percentile", h.baseline_percentile);
        s.read("initial_dose", h.initial_dose);
        s.read("sub_step", h.sub_step);
        s.read("noise_floor_samples", h.noise_floor_samples);
        s.finish();
    }
    c.validate();
    return c;
}

Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string config_to_json(const Config& c) {
    json root;
    const ParamBounds& b = c.sim;
    root["sim"] = {{"k_e", range_json(b.k_e)},       {"k_bind", range_json(b.k_bind)}, {"k_rec", range_json(b.k_rec)},
                   {"s0", range_json(b.s0)},         {"s_meal", range_json(b.s_meal)}, {"k_A", range_json(b.k_A)},
                   {"a_high", range_json(b.a_high)}, {"a_low", range_json(b.a_low)},   {"k_r", range_json(b.k_r)},
                   {"k_d", range_json(b.k_d)},       {"eta_r", range_json(b.eta_r)},   {"eta_d", range_json(b.eta_d)},
                   {"sigma_noise", range_json(b.sigma_noise)}};
    root["meals"] = {{"breakfast_amplitude", range_json(c.meals.amplitude[0])},
                     {"lunch_amplitude", range_json(c.meals.amplitude[1])},
                     {"dinner_amplitude", range_json(c.meals.amplitude[2])},
                     {"max_shift", c.meals.max_shift},
                     {"spread", range_json(c.meals.spread)}};
    root["bnn"] = {{"hidden", c.bnn.shape.hidden},
                   {"t_hist", c.bnn.shape.t_hist},
                   {"t_fut", c.bnn.shape.t_fut},
                   {"dropout", c.bnn.dropout},
                   {"validation_fraction", c.bnn.validation_fraction},
                   {"train", train_json(c.bnn.train)},
                   {"finetune", train_json(c.bnn.finetune)}};
    root["mpc"] = {{"theta", c.mpc.theta},
                   {"p", c.mpc.confidence},
                   {"lambda", c.mpc.lambda},
                   {"c", c.mpc.dose_cost},
                   {"T_days", c.mpc.horizon_days},
                   {"J", c.mpc.scenarios},
                   {"M", c.mpc.mc_passes},
                   {"u_min", c.mpc.u_min},
                   {"u_max", c.mpc.u_max},
                   {"action_factors", c.mpc.action_factors},
                   {"enumeration_cap", c.mpc.enumeration_cap},
                   {"dose_hour", c.mpc.dose_hour}};
    const HarnessSettings& h = c.harness;
    root["harness"] = {{"foundation_patients", h.foundation_patients},
                       {"foundation_days", h.foundation_days},
                       {"test_patients", h.test_patients},
                       {"finetune_days", h.finetune_days},
                       {"validation_days", h.validation_days},
                       {"closed_loop_days", h.closed_loop_days},
                       {"calibration_patients", h.calibration_patients},
                       {"calibration_days", h.calibration_days},
                       {"calibration_warmup_days", h.calibration_warmup_days},
                       {"window_stride", h.window_stride},
                       {"u_max", h.u_max},
                       {"dose_block_min", h.dose_block_min},
                       {"dose_block_max", h.dose_block_max},
                       {"baseline_grid", h.baseline_grid},
                       {"satisfaction_target", h.satisfaction_target},
                       {"baseline_percentile", h.baseline_percentile},
                       {"initial_dose", h.initial_dose},
                       {"sub_step", h.sub_step},
                       {"noise_floor_samples", h.noise_floor_samples}};
    return root.dump(2);
}

}  // namespace gmpc
