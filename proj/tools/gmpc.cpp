// Command-line front end: data generation, training, validation and the
// closed-loop benchmark. Every subcommand writes into --out-dir.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gmpc/error.hpp"
#include "gmpc/harness.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
    std::uint64_t seed = 20240607;
    std::string config_path;
    std::string out_dir = ".";
};

gmpc::Config load(const Globals& g) {
    if (g.config_path.empty()) {
        gmpc::Config c;
        c.validate();
        return c;
    }
    return gmpc::load_config(g.config_path);
}

fs::path out_path(const Globals& g, const std::string& name) {
    fs::create_directories(g.out_dir);
    return fs::path(g.out_dir) / name;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw gmpc::IoError("cannot write " + path.string());
    out << text;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw gmpc::IoError("cannot read " + path);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string patient_name(int id, const char* ext) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "patient_%03d%s", id, ext);
    return buf;
}

std::vector<int> patient_list(const std::vector<int>& requested, const gmpc::Config& c) {
    if (!requested.empty()) {
        for (int id : requested)
            if (id < 0) throw gmpc::ConfigError("patient index must be non-negative");
        return requested;
    }
    std::vector<int> all;
    for (int i = 0; i < c.harness.test_patients; ++i) all.push_back(i);
    return all;
}

/// A weights file used for every patient, or a directory of patient_NNN.gmpcw.
gmpc::bnn::ModelWeights weights_for(const std::string& where, int id) {
    if (fs::is_directory(where)) return gmpc::bnn::load_weights((fs::path(where) / patient_name(id, ".gmpcw")).string());
    return gmpc::bnn::load_weights(where);
}

void write_history_csv(const fs::path& path, const gmpc::bnn::TrainHistory& h) {
    std::ostringstream out;
    out << "epoch,train_loss,validation_loss,learning_rate\n";
    for (std::size_t e = 0; e < h.train_loss.size(); ++e)
        out << e << ',' << h.train_loss[e] << ',' << h.validation_loss[e] << ',' << h.learning_rate[e] << '\n';
    write_text(path, out.str());
}

void write_decisions_csv(const fs::path& path, const std::vector<gmpc::DailyDecision>& ds) {
    std::ostringstream out;
    out << "day,dose,plan,score,worst_violation,mean_sigma,indicator_fraction\n";
    char buf[200];
    for (const auto& d : ds) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%s,%.17g,%.17g,%.17g,%.17g\n", d.day, d.dose, d.plan.c_str(),
                      d.score, d.worst_violation, d.mean_sigma, d.indicator_fraction);
        out << buf;
    }
    write_text(path, out.str());
}

void write_report(const Globals& g, const std::string& stem, const gmpc::BenchmarkReport& r,
                  const gmpc::BenchmarkSummary* s = nullptr) {
    write_text(out_path(g, stem + ".json"), gmpc::report_to_json(r, s));
    write_text(out_path(g, stem + ".csv"), gmpc::report_to_csv(r));
}

std::string one_line(std::string s) {
    for (char& ch : s)
        if (ch == '\n' || ch == '\r') ch = ' ';
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Personalized PPI dosing: simulator, Bayesian forecaster and chance-constrained MPC"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "root seed for every random stream");
    app.add_option("--config", g.config_path, "JSON configuration file")->check(CLI::ExistingFile);
    app.add_option("--out-dir", g.out_dir, "directory for outputs");

    // generate-data
    auto* gen = app.add_subcommand("generate-data", "simulate the foundation dataset");
    std::optional<int> gen_patients, gen_days;
    bool include_hidden = false;
    gen->add_option("--patients", gen_patients, "number of virtual patients");
    gen->add_option("--days", gen_days, "days per patient");
    gen->add_flag("--include-hidden", include_hidden, "also write the hidden acid trace and patient parameters");

    // train
    auto* trn = app.add_subcommand("train", "train the foundation network");
    std::string train_data;
    trn->add_option("--data", train_data, "dataset directory (default: simulate from --seed)");

    // finetune
    auto* fin = app.add_subcommand("finetune", "fine-tune decoder and head per test patient");
    std::string fin_weights;
    std::vector<int> fin_patients;
    fin->add_option("--weights", fin_weights, "foundation weights (default: <out-dir>/foundation.gmpcw)");
    fin->add_option("--patient", fin_patients, "test patient indices (default: all)");

    // validate-open-loop
    auto* val = app.add_subcommand("validate-open-loop", "open-loop forecast RMSE on fresh days");
    std::string val_weights;
    std::vector<int> val_patients;
    std::optional<int> val_days;
    val->add_option("--weights", val_weights, "weights file or directory of patient weights (default: <out-dir>)");
    val->add_option("--patient", val_patients, "test patient indices (default: all)");
    val->add_option("--days", val_days, "evaluation days");

    // run-closed-loop
    auto* cl = app.add_subcommand("run-closed-loop", "daily MPC dosing in closed loop");
    std::string cl_weights;
    std::vector<int> cl_patients;
    std::optional<int> cl_days;
    bool cl_hidden = false;
    cl->add_option("--weights", cl_weights, "weights file or directory of patient weights (default: <out-dir>)");
    cl->add_option("--patient", cl_patients, "test patient indices (default: all)");
    cl->add_option("--days", cl_days, "closed-loop days");
    cl->add_flag("--include-hidden", cl_hidden, "include the hidden acid column in traces");

    // baseline
    auto* base = app.add_subcommand("baseline", "calibrate and run the fixed twice-daily regimen");
    std::optional<double> base_dose;
    std::vector<int> base_patients;
    std::optional<int> base_days;
    bool base_hidden = false;
    base->add_option("--dose", base_dose, "daily dose (default: population calibration)");
    base->add_option("--patient", base_patients, "test patient indices (default: all)");
    base->add_option("--days", base_days, "evaluation days");
    base->add_flag("--include-hidden", base_hidden, "include the hidden acid column in traces");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "merge reports and summarize");
    std::vector<std::string> ev_reports;
    ev->add_option("--reports", ev_reports, "report JSON files (default: the ones found in --out-dir)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "error: usage: " << one_line(e.what()) << '\n';
        return 2;
    }

    try {
        const gmpc::Config cfg = load(g);
        const auto& h = cfg.harness;

        if (*gen) {
            const auto data = gmpc::generate_foundation_dataset(cfg, gen_patients.value_or(h.foundation_patients),
                                                                gen_days.value_or(h.foundation_days), g.seed);
            const fs::path dir = out_path(g, "dataset");
            gmpc::write_dataset(data, cfg, dir.string(), include_hidden);
            std::cout << "dataset: " << data.episodes.size() << " patients, " << data.windows.train.size()
                      << " training windows, " << data.windows.validation.size() << " validation windows -> "
                      << dir.string() << '\n';
        } else if (*trn) {
            const auto data = train_data.empty()
                                  ? gmpc::generate_foundation_dataset(cfg, h.foundation_patients, h.foundation_days, g.seed)
                                  : gmpc::read_dataset(train_data, cfg);
            gmpc::bnn::TrainHistory hist;
            const auto w = gmpc::train_foundation(data, cfg, g.seed, &hist);
            gmpc::bnn::save_weights(w, out_path(g, "foundation.gmpcw").string());
            write_history_csv(out_path(g, "foundation_history.csv"), hist);
            std::cout << "foundation: best validation loss " << hist.best_validation << " at epoch " << hist.best_epoch
                      << '\n';
        } else if (*fin) {
            const auto foundation = gmpc::bnn::load_weights(
                fin_weights.empty() ? out_path(g, "foundation.gmpcw").string() : fin_weights);
            for (int id : patient_list(fin_patients, cfg)) {
                const auto patient = gmpc::make_test_patient(cfg, g.seed, id);
                const auto r = gmpc::finetune_for_patient(foundation, patient, cfg, g.seed);
                gmpc::bnn::save_weights(r.weights, out_path(g, patient_name(id, ".gmpcw")).string());
                write_history_csv(out_path(g, patient_name(id, "_finetune_history.csv")), r.history);
                std::cout << "patient " << id << ": fine-tune validation loss " << r.history.best_validation << '\n';
            }
        } else if (*val) {
            const std::string where = val_weights.empty() ? g.out_dir : val_weights;
            gmpc::BenchmarkReport rep;
            rep.theta = cfg.mpc.theta;
            json floors = json::array();
            for (int id : patient_list(val_patients, cfg)) {
                const auto patient = gmpc::make_test_patient(cfg, g.seed, id);
                const auto r = gmpc::run_open_loop_validation(weights_for(where, id), patient,
                                                              val_days.value_or(h.validation_days), cfg, g.seed);
                std::ostringstream trace;
                gmpc::write_open_loop_csv(r, trace);
                write_text(out_path(g, "open_loop_" + patient_name(id, ".csv")), trace.str());
                gmpc::PatientReport row;
                row.patient_id = id;
                row.rmse_reflux = r.rmse_reflux;
                row.rmse_digestion = r.rmse_digestion;
                rep.patients.push_back(row);
                floors.push_back({{"patient_id", id},
                                  {"rmse_reflux", r.rmse_reflux},
                                  {"rmse_digestion", r.rmse_digestion},
                                  {"floor_reflux", r.floor_reflux},
                                  {"floor_digestion", r.floor_digestion}});
                std::cout << "patient " << id << ": rmse reflux " << r.rmse_reflux << " (floor " << r.floor_reflux
                          << "), digestion " << r.rmse_digestion << " (floor " << r.floor_digestion << ")\n";
            }
            write_report(g, "open_loop_report", rep);
            write_text(out_path(g, "open_loop_floors.json"), floors.dump(2) + "\n");
        } else if (*cl) {
            const std::string where = cl_weights.empty() ? g.out_dir : cl_weights;
            gmpc::BenchmarkReport rep;
            rep.theta = cfg.mpc.theta;
            for (int id : patient_list(cl_patients, cfg)) {
                const auto patient = gmpc::make_test_patient(cfg, g.seed, id);
                const auto r = gmpc::run_closed_loop(weights_for(where, id), patient,
                                                     cl_days.value_or(h.closed_loop_days), cfg.mpc, cfg, g.seed);
                std::ostringstream trace;
                gmpc::write_arm_trace_csv(r.arm, trace, cl_hidden);
                write_text(out_path(g, "closed_loop_" + patient_name(id, ".csv")), trace.str());
                write_decisions_csv(out_path(g, "decisions_" + patient_name(id, ".csv")), r.decisions);
                gmpc::PatientReport row;
                row.patient_id = id;
                row.mpc = r.arm;
                rep.patients.push_back(row);
                std::cout << "patient " << id << ": usage " << r.arm.usage << ", satisfaction reflux "
                          << r.arm.sat_reflux << ", digestion " << r.arm.sat_digestion << '\n';
            }
            write_report(g, "closed_loop_report", rep);
        } else if (*base) {
            gmpc::BenchmarkReport rep;
            rep.theta = cfg.mpc.theta;
            if (base_dose) {
                if (*base_dose < 0.0) throw gmpc::DomainError("--dose must be non-negative");
                rep.fixed_dose = *base_dose;
            } else {
                const auto cal = gmpc::calibrate_fixed_regimen(cfg, g.seed);
                rep.fixed_dose = cal.dose;
                json cj = {{"grid", cal.grid},
                           {"requirement", cal.requirement},
                           {"reachable", cal.reachable},
                           {"satisfaction", cal.satisfaction},
                           {"dose", cal.dose},
                           {"all_reachable", cal.all_reachable}};
                write_text(out_path(g, "calibration.json"), cj.dump(2) + "\n");
                if (!cal.all_reachable)
                    std::cerr << "warning: some calibration patients never reach the satisfaction target; "
                                 "their requirement is the top of the grid\n";
            }
            for (int id : patient_list(base_patients, cfg)) {
                const auto patient = gmpc::make_test_patient(cfg, g.seed, id);
                const auto arm = gmpc::run_fixed_regimen(patient, rep.fixed_dose,
                                                         base_days.value_or(h.closed_loop_days), cfg, g.seed);
                std::ostringstream trace;
                gmpc::write_arm_trace_csv(arm, trace, base_hidden);
                write_text(out_path(g, "fixed_" + patient_name(id, ".csv")), trace.str());
                gmpc::PatientReport row;
                row.patient_id = id;
                row.fixed = arm;
                rep.patients.push_back(row);
                std::cout << "patient " << id << ": fixed dose " << rep.fixed_dose << "/day, satisfaction reflux "
                          << arm.sat_reflux << ", digestion " << arm.sat_digestion << '\n';
            }
            write_report(g, "baseline_report", rep);
        } else if (*ev) {
            if (ev_reports.empty())
                for (const char* stem : {"open_loop_report.json", "closed_loop_report.json", "baseline_report.json"})
                    if (fs::exists(fs::path(g.out_dir) / stem)) ev_reports.push_back((fs::path(g.out_dir) / stem).string());
            if (ev_reports.empty()) throw gmpc::EvaluationError("no reports to evaluate");
            std::vector<gmpc::BenchmarkReport> parts;
            for (const auto& p : ev_reports) parts.push_back(gmpc::report_from_json(read_text(p)));
            const auto merged = gmpc::merge_reports(parts);
            const auto s = gmpc::evaluate(merged);
            write_report(g, "benchmark_report", merged, &s);
            std::cout << "patients " << s.patients << ": mean usage reduction " << s.mean_reduction_pct
                      << "%, min satisfaction " << s.min_satisfaction_pct << "% (fixed "
                      << s.min_fixed_satisfaction_pct << "%)\n";
        }
    } catch (const gmpc::Error& e) {
        std::cerr << "error: " << e.kind() << ": " << one_line(e.what()) << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << one_line(e.what()) << '\n';
        return 1;
    }
    return 0;
}
