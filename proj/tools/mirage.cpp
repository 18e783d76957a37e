// Command-line front end: scenario runs, Monte Carlo experiments, detector
// calibration, and the telemetry proxy with split-process endpoints.

#include "mirage/config.hpp"
#include "mirage/detectors.hpp"
#include "mirage/proxy.hpp"
#include "mirage/recurrent.hpp"
#include "mirage/scenario.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <memory>

namespace {

using namespace mirage;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitSimulation = 2;
constexpr int kExitIo = 3;

struct LoadedDetectors {
    Thresholds thresholds;
    std::shared_ptr<const GruModel> model;
};

LoadedDetectors load_detectors(const ScenarioConfig& cfg,
                               const std::string& thresholds_override) {
    LoadedDetectors out;
    std::string path = thresholds_override.empty() ? cfg.thresholds_file
                                                   : thresholds_override;
    if (path.empty()) {
        out.thresholds = default_thresholds(cfg.detectors);
        return out;
    }
    out.thresholds = load_thresholds(path);
    const Thresholds fallback = default_thresholds(cfg.detectors);
    if (out.thresholds.chi2_tau_df12 <= 0.0) {
        out.thresholds.chi2_tau_df12 = fallback.chi2_tau_df12;
    }
    if (out.thresholds.vision_tau <= 0.0) {
        out.thresholds.vision_tau = fallback.vision_tau;
    }
    if (out.thresholds.cusum_threshold <= 0.0) {
        out.thresholds.cusum_threshold = fallback.cusum_threshold;
    }
    if (cfg.detectors.recurrent && out.thresholds.has_recurrent()) {
        std::string weights = out.thresholds.recurrent_weights;
        if (!std::filesystem::path(weights).is_absolute()) {
            weights = (std::filesystem::path(path).parent_path() / weights)
                          .string();
        }
        out.model = std::make_shared<GruModel>(GruModel::load(weights));
    }
    return out;
}

int cmd_run(const std::string& config_path, long seed_flag, bool seed_given,
            const std::string& out_dir, bool attack_flag,
            const std::string& thresholds_path) {
    ScenarioConfig cfg = load_scenario_config(config_path);
    if (attack_flag) cfg.attack.enabled = true;
    const std::uint64_t seed =
        seed_given ? static_cast<std::uint64_t>(seed_flag) : cfg.seed;

    const LoadedDetectors det = load_detectors(cfg, thresholds_path);
    const RunRecord record =
        run_scenario(cfg, seed, det.thresholds, det.model);

    std::filesystem::create_directories(out_dir);
    export_run_csv(record, out_dir + "/run.csv");
    export_run_summary(record, out_dir + "/summary.txt");
    write_trajectory_svg(record, cfg, out_dir + "/trajectory.svg");
    std::cout << "run: " << record.steps.size() << " steps, seed " << seed
              << ", peak_dev_xy " << record.summary.peak_dev_xy << " m\n";
    return kExitOk;
}

int cmd_montecarlo(const std::string& config_path, int runs,
                   const std::string& out_dir, long seed_flag, bool seed_given,
                   const std::string& thresholds_path, int threads) {
    ScenarioConfig cfg = load_scenario_config(config_path);
    if (seed_given) cfg.seed = static_cast<std::uint64_t>(seed_flag);
    const LoadedDetectors det = load_detectors(cfg, thresholds_path);

    const MonteCarloReport report =
        monte_carlo(cfg, runs, det.thresholds, det.model, threads);
    export_report(report, out_dir);
    write_alarm_svg(report, out_dir + "/alarms.svg");

    std::cout << "montecarlo: " << report.runs << " runs\n";
    std::cout << "  chi2 nominal rate " << report.nominal_chi2_rate << "\n";
    if (report.chi2) {
        std::cout << "  chi2 p_fa " << report.chi2->p_fa << " p_td "
                  << report.chi2->p_td << "\n";
    }
    if (report.recurrent) {
        std::cout << "  recurrent p_fa " << report.recurrent->p_fa << " p_td "
                  << report.recurrent->p_td << "\n";
    }
    if (cfg.attack.enabled) {
        std::cout << "  effective fraction " << report.effective_fraction
                  << " mean peak dev " << report.mean_peak_dev << " m\n";
    }
    return kExitOk;
}

int cmd_calibrate(const std::string& config_path, const std::string& detector,
                  double p_fa, const std::string& out_path, int runs,
                  int epochs) {
    if (p_fa <= 0.0 || p_fa >= 1.0) {
        throw ConfigError("--pfa must be in (0, 1)");
    }
    ScenarioConfig cfg = load_scenario_config(config_path);
    cfg.detectors.p_fa = p_fa;
    cfg.attack.enabled = false;

    std::string sidecar = out_path;
    if (sidecar.empty()) sidecar = config_path + ".thresholds";

    Thresholds t;
    if (std::filesystem::exists(sidecar)) t = load_thresholds(sidecar);

    if (detector == "chi2") {
        t.chi2_tau_df12 = chi2_quantile(12, 1.0 - p_fa);
        t.vision_tau = chi2_quantile(3, 1.0 - p_fa);
        std::cout << "chi2 thresholds: physical df12 " << t.chi2_tau_df12
                  << ", vision df3 " << t.vision_tau << "\n";
    } else if (detector == "cusum") {
        // Quantile of the unreset CUSUM statistic over nominal runs.
        t.cusum_drift = cfg.detectors.cusum_drift;
        std::vector<double> g_values;
        const Thresholds base = default_thresholds(cfg.detectors);
        for (int i = 0; i < runs; ++i) {
            const RunRecord r =
                run_scenario(cfg, cfg.seed + static_cast<std::uint64_t>(i),
                             base, nullptr);
            double g = 0.0;
            for (const StepLog& log : r.steps) {
                g = std::max(0.0, g + log.chi2_score - log.chi2_df -
                                      t.cusum_drift);
                g_values.push_back(g);
            }
        }
        std::sort(g_values.begin(), g_values.end());
        const auto idx = static_cast<std::size_t>(std::min<double>(
            g_values.size() - 1.0, std::ceil((1.0 - p_fa) * g_values.size())));
        t.cusum_threshold = std::max(1e-9, g_values[idx]);
        std::cout << "cusum threshold: " << t.cusum_threshold << " (drift "
                  << t.cusum_drift << ")\n";
    } else if (detector == "recurrent") {
        const Thresholds base = default_thresholds(cfg.detectors);
        std::vector<MatX> traces;
        for (int i = 0; i < runs; ++i) {
            const RunRecord r =
                run_scenario(cfg, cfg.seed + static_cast<std::uint64_t>(i),
                             base, nullptr);
            MatX trace(static_cast<Eigen::Index>(r.steps.size()),
                       kRecurrentInputDim);
            for (std::size_t s = 0; s < r.steps.size(); ++s) {
                trace.row(static_cast<Eigen::Index>(s)) =
                    r.steps[s].recurrent_input.transpose();
            }
            traces.push_back(std::move(trace));
        }
        TrainHyperParams hp;
        hp.epochs = epochs;
        hp.seed = cfg.seed;
        const TrainResult result = train_recurrent(traces, hp, p_fa);
        const std::string weights = sidecar + ".weights";
        result.model.save(weights);
        t.recurrent_threshold = result.threshold;
        t.recurrent_weights = std::filesystem::path(weights).filename();
        t.recurrent_window = hp.window;
        std::cout << "recurrent: loss " << result.final_loss << ", threshold "
                  << result.threshold << ", holdout alarm rate "
                  << result.holdout_alarm_rate << "\n";
    } else {
        throw ConfigError("--detector must be chi2, cusum or recurrent");
    }

    write_thresholds(t, sidecar);
    std::cout << "thresholds written to " << sidecar << "\n";
    return kExitOk;
}

int cmd_proxy(const std::string& listen, const std::string& upstream,
              const std::string& mode, const std::string& config_path,
              const std::string& out_path) {
    if (mode != "pass" && mode != "attack") {
        throw ConfigError("--mode must be 'pass' or 'attack'");
    }
    ScenarioConfig cfg;
    if (mode == "attack") {
        if (config_path.empty()) {
            throw ConfigError("attack mode requires --config");
        }
        cfg = load_scenario_config(config_path);
        cfg.attack.enabled = true;
    }

    WireListener listener(Endpoint::parse(listen));
    std::cout << "proxy listening on port " << listener.port() << "\n";
    WireConnection sim_side = listener.accept_one();
    WireConnection ctl_side = WireConnection::connect_to(Endpoint::parse(upstream));

    const ProxySummary summary = proxy_session(
        std::move(sim_side), std::move(ctl_side),
        mode == "pass" ? ProxyMode::kPass : ProxyMode::kAttack, cfg);

    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!out_path.empty()) {
        file.open(out_path);
        if (!file) throw IoError("cannot open " + out_path);
        out = &file;
    }
    *out << "downstream_messages = " << summary.downstream_messages << "\n"
         << "upstream_messages = " << summary.upstream_messages << "\n"
         << "falsified_messages = " << summary.falsified_messages << "\n"
         << "bytes_forwarded = " << summary.bytes_forwarded << "\n"
         << "attack_start = " << summary.attack_start << "\n"
         << "attack_stop = " << summary.attack_stop << "\n"
         << "clean_shutdown = " << (summary.clean_shutdown ? 1 : 0) << "\n";
    return kExitOk;
}

int cmd_sim(const std::string& config_path, long seed_flag, bool seed_given,
            const std::string& connect, const std::string& out_dir) {
    const ScenarioConfig cfg = load_scenario_config(config_path);
    const std::uint64_t seed =
        seed_given ? static_cast<std::uint64_t>(seed_flag) : cfg.seed;
    run_sim_endpoint(cfg, seed, Endpoint::parse(connect), out_dir);
    return kExitOk;
}

int cmd_ctl(const std::string& config_path, const std::string& listen,
            const std::string& out_dir, const std::string& thresholds_path) {
    const ScenarioConfig cfg = load_scenario_config(config_path);
    const LoadedDetectors det = load_detectors(cfg, thresholds_path);
    WireListener listener(Endpoint::parse(listen));
    std::cout << "controller listening on port " << listener.port() << "\n";
    run_ctl_endpoint(cfg, det.thresholds, det.model, listener, out_dir);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mirage: perception-based quadcopter control simulator with "
                 "stealthy sensor/vision falsification"};
    app.require_subcommand(1);

    // run
    std::string run_config, run_out = "out", run_thresholds;
    long run_seed = 0;
    bool run_attack = false;
    auto* run = app.add_subcommand("run", "Run one closed-loop scenario");
    run->add_option("--config", run_config, "Scenario config file")->required();
    auto* run_seed_opt = run->add_option("--seed", run_seed, "Override the config seed");
    run->add_option("--out", run_out, "Output directory");
    run->add_flag("--attack", run_attack, "Force the configured attack on");
    run->add_option("--thresholds", run_thresholds, "Thresholds sidecar file");

    // montecarlo
    std::string mc_config, mc_out = "out", mc_thresholds;
    int mc_runs = 10, mc_threads = 0;
    long mc_seed = 0;
    auto* mc = app.add_subcommand("montecarlo", "Aggregate seeded runs");
    mc->add_option("--config", mc_config, "Scenario config file")->required();
    mc->add_option("--runs", mc_runs, "Number of runs")->check(CLI::PositiveNumber);
    mc->add_option("--out", mc_out, "Output directory");
    auto* mc_seed_opt = mc->add_option("--seed", mc_seed, "Override the base seed");
    mc->add_option("--thresholds", mc_thresholds, "Thresholds sidecar file");
    mc->add_option("--threads", mc_threads, "Worker threads (0 = auto)");

    // calibrate
    std::string cal_config, cal_detector, cal_out;
    double cal_pfa = 0.01;
    int cal_runs = 12, cal_epochs = 4;
    auto* cal = app.add_subcommand("calibrate", "Compute detector thresholds");
    cal->add_option("--config", cal_config, "Scenario config file")->required();
    cal->add_option("--detector", cal_detector, "chi2 | cusum | recurrent")
        ->required();
    cal->add_option("--pfa", cal_pfa, "Target false-alarm probability");
    cal->add_option("--out", cal_out, "Thresholds sidecar path");
    cal->add_option("--runs", cal_runs, "Nominal runs used for calibration");
    cal->add_option("--epochs", cal_epochs, "Training epochs (recurrent)");

    // proxy
    std::string px_listen, px_upstream, px_mode = "pass", px_config, px_out;
    auto* px = app.add_subcommand("proxy", "MITM telemetry proxy");
    px->add_option("--listen", px_listen, "host:port to accept the simulator")
        ->required();
    px->add_option("--upstream", px_upstream, "host:port of the controller")
        ->required();
    px->add_option("--mode", px_mode, "pass | attack");
    px->add_option("--config", px_config, "Scenario config (attack mode)");
    px->add_option("--out", px_out, "Session summary file");

    // sim / ctl endpoints
    std::string sim_config, sim_connect, sim_out = "out";
    long sim_seed = 0;
    auto* simc = app.add_subcommand("sim", "Split-process simulation endpoint");
    simc->add_option("--config", sim_config, "Scenario config file")->required();
    auto* sim_seed_opt = simc->add_option("--seed", sim_seed, "Override the config seed");
    simc->add_option("--connect", sim_connect, "host:port of controller/proxy")
        ->required();
    simc->add_option("--out", sim_out, "Output directory");

    std::string ctl_config, ctl_listen, ctl_out = "out", ctl_thresholds;
    auto* ctlc = app.add_subcommand("ctl", "Split-process controller endpoint");
    ctlc->add_option("--config", ctl_config, "Scenario config file")->required();
    ctlc->add_option("--listen", ctl_listen, "host:port to accept on")->required();
    ctlc->add_option("--out", ctl_out, "Output directory");
    ctlc->add_option("--thresholds", ctl_thresholds, "Thresholds sidecar file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (run->parsed()) {
            return cmd_run(run_config, run_seed, run_seed_opt->count() > 0,
                           run_out, run_attack, run_thresholds);
        }
        if (mc->parsed()) {
            return cmd_montecarlo(mc_config, mc_runs, mc_out, mc_seed,
                                  mc_seed_opt->count() > 0, mc_thresholds,
                                  mc_threads);
        }
        if (cal->parsed()) {
            return cmd_calibrate(cal_config, cal_detector, cal_pfa, cal_out,
                                 cal_runs, cal_epochs);
        }
        if (px->parsed()) {
            return cmd_proxy(px_listen, px_upstream, px_mode, px_config, px_out);
        }
        if (simc->parsed()) {
            return cmd_sim(sim_config, sim_seed, sim_seed_opt->count() > 0,
                           sim_connect, sim_out);
        }
        if (ctlc->parsed()) {
            return cmd_ctl(ctl_config, ctl_listen, ctl_out, ctl_thresholds);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const SimulationError& e) {
        std::cerr << "simulation error: " << e.what() << "\n";
        return kExitSimulation;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitSimulation;
    }
    return kExitConfig;
}
