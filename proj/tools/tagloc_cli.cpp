// SPDX-License-Identifier: Apache-2.0
//
// tagloc: range-angle estimation and tag localization for multi-static
// backscatter networks
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tagloc/harness.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tagloc;

namespace
{

struct CommonOpts
{
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> trials;
    std::optional<std::string> out;
    std::optional<std::string> methods;
    std::optional<int> threads;
};

void add_common(CLI::App *cmd, CommonOpts &o)
{
    cmd->add_option("--config", o.config_path, "experiment config (JSON)");
    cmd->add_option("--seed", o.seed, "override the config seed");
    cmd->add_option("--trials", o.trials, "override the trial count");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--methods", o.methods, "comma-separated estimator list");
    cmd->add_option("--threads", o.threads, "worker threads for trials");
}

ExperimentConfig resolve_config(const CommonOpts &o)
{
    ExperimentConfig cfg = o.config_path.empty() ? default_config() : load_config(o.config_path);
    if (o.seed)
        cfg.seed = *o.seed;
    if (o.trials)
        cfg.n_trials = *o.trials;
    if (o.out)
        cfg.out_dir = *o.out;
    if (o.threads)
        cfg.threads = *o.threads;
    if (o.methods)
    {
        cfg.estimators.clear();
        std::stringstream ss(*o.methods);
        std::string tok;
        while (std::getline(ss, tok, ','))
            if (!tok.empty())
                cfg.estimators.push_back(tok);
    }
    validate_config(cfg);
    return cfg;
}

// One full channel realization for the config's scenario.
std::vector<CfrStack> synthesize_all(const Scenario &sc)
{
    std::vector<CfrStack> stacks;
    Rng rng(sc.seed);
    const Position &rx = sc.rx_positions[0];
    const double bw = sc.waveform.bandwidth_hz;
    for (int tx = 0; tx < static_cast<int>(sc.tx_positions.size()); ++tx)
    {
        const PathSet leg = build_leg_paths(sc.tx_positions[static_cast<std::size_t>(tx)], rx,
                                            sc.scatterers, bw, rng);
        stacks.push_back(add_noise(carrier_cfr(leg, sc.waveform, sc.rx_array, tx, 0), sc.snr_db, rng));
    }
    for (int tag = 0; tag < static_cast<int>(sc.tags.size()); ++tag)
        for (int tx = 0; tx < static_cast<int>(sc.tx_positions.size()); ++tx)
        {
            const Position &txp = sc.tx_positions[static_cast<std::size_t>(tx)];
            const Position &tagp = sc.tags[static_cast<std::size_t>(tag)];
            const PathSet tx_tag = build_leg_paths(txp, tagp, sc.scatterers, bw, rng);
            const PathSet tag_rx = build_leg_paths(tagp, rx, sc.scatterers, bw, rng);
            stacks.push_back(add_noise(
                backscatter_cfr(tx_tag, tag_rx, sc.waveform, sc.rx_array, tx, 0, tag), sc.snr_db,
                rng));
        }
    return stacks;
}

int cmd_simulate(const CommonOpts &o)
{
    ExperimentConfig cfg = resolve_config(o);
    Rng rng = Rng::substream(cfg.seed, 0);
    Scenario sc = make_scenario(cfg, rng);
    sc.seed = cfg.seed;
    const auto stacks = synthesize_all(sc);
    fs::create_directories(cfg.out_dir);
    const std::string path = (fs::path(cfg.out_dir) / "dataset.json").string();
    save_dataset(path, sc, stacks);
    std::cout << "wrote " << path << " (" << stacks.size() << " stacks)\n";
    return 0;
}

int cmd_estimate(const CommonOpts &o, const std::string &dataset_path)
{
    ExperimentConfig cfg = resolve_config(o);
    auto [sc, stacks] = load_dataset(dataset_path);
    const EstimationSetup setup{GridSpec::make(sc.waveform.n_subcarriers, cfg.g_tau, cfg.g_theta),
                                sc.rx_array, sc.waveform.bandwidth_hz};
    const Position &rx = sc.rx_positions[0];

    // index stacks
    std::map<int, const CfrStack *> carriers;
    std::map<std::pair<int, int>, const CfrStack *> scatters;
    for (const auto &s : stacks)
    {
        if (s.kind == ChannelKind::carrier)
            carriers[s.tx_index] = &s;
        else
            scatters[{s.tag_index, s.tx_index}] = &s;
    }

    std::ostringstream out;
    out << "tag,tx,method,d_hat_m,theta_hat_rad,tau0_hat,taub_hat,failed\n";
    for (const std::string &name : cfg.estimators)
    {
        const EstimatorThresholds &t = cfg.thresholds;
        for (const auto &[key, hb] : scatters)
        {
            const auto [tag, tx] = key;
            auto itc = carriers.find(tx);
            if (itc == carriers.end())
                continue;
            const double tau0 =
                meters_to_delay(distance(sc.tx_positions[static_cast<std::size_t>(tx)], rx),
                                sc.waveform.bandwidth_hz);
            EstimateOutcome oc;
            if (name == "fft2d")
                oc = fft2d_estimate(*itc->second, *hb, setup, tau0, t.fft2d);
            else if (name == "music2d")
                oc = music2d_estimate(*itc->second, *hb, setup, tau0, t.music2d);
            else if (name == "srae")
                oc = srae_estimate(*itc->second, *hb, setup, tau0, t.srae);
            else if (name == "jrac")
                oc = jrac_estimate(*itc->second, *hb, setup, tau0, t.jrac_min, t.jrac_max);
            else
                oc = cir_first_peak_range(*itc->second, *hb, setup, tau0, t.cir);
            out << tag << ',' << tx << ',' << name << ',';
            if (oc.ok())
                out << oc.estimate->bistatic_range_m << ','
                    << (oc.estimate->has_azimuth ? std::to_string(oc.estimate->azimuth_rad)
                                                 : std::string("nan"))
                    << ',' << oc.estimate->tau_carrier_hat << ','
                    << oc.estimate->tau_backscatter_hat << ",0\n";
            else
                out << "nan,nan,nan,nan,1\n";
        }
    }
    fs::create_directories(cfg.out_dir);
    const std::string path = (fs::path(cfg.out_dir) / "estimates.csv").string();
    std::ofstream f(path);
    f << out.str();
    std::cout << "wrote " << path << "\n";
    return 0;
}

int cmd_localize(const CommonOpts &o, const std::string &measurements_path)
{
    ExperimentConfig cfg = resolve_config(o);
    std::ifstream in(measurements_path);
    if (!in)
        throw std::runtime_error("localize: cannot open " + measurements_path);
    json j;
    in >> j;

    std::ostringstream out;
    out << "tag,method,x,y,objective,iterations,failed\n";
    const int dim = j.at("dim").get<int>();
    std::vector<Position> txs, rxs;
    for (const auto &p : j.at("tx_positions"))
        txs.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    for (const auto &p : j.at("rx_positions"))
        rxs.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    for (const auto &tagj : j.at("tags"))
    {
        MeasurementSet ms;
        ms.dim = dim;
        ms.tx_positions = txs;
        ms.rx_positions = rxs;
        const int id = tagj.at("id").get<int>();
        for (const auto &r : tagj.value("ranges", json::array()))
            ms.ranges.push_back(RangeMeasurement{r.at("d_hat").get<double>(),
                                                 r.value("sigma", cfg.sigma_range),
                                                 r.at("tx").get<int>(), r.value("rx", 0)});
        for (const auto &a : tagj.value("angles", json::array()))
        {
            Position u(a.at("u").at(0).get<double>(), a.at("u").at(1).get<double>());
            ms.angles.push_back(
                AngleMeasurement{u, a.value("kappa", cfg.kappa_angle), a.value("rx", 0)});
        }
        for (const std::string &name : cfg.positioners)
        {
            PositionEstimate pe;
            bool solved = false;
            try
            {
                if (name == "ml_grid")
                    pe = ml_grid_search(ms,
                                        Box{Position(cfg.grid_region_x[0], cfg.grid_region_y[0]),
                                            Position(cfg.grid_region_x[1], cfg.grid_region_y[1])},
                                        cfg.grid_pitch);
                else if (name == "ml_gradient")
                    pe = ml_gradient_ascent(ms, cfg.gradient);
                else
                    pe = irls_solve(ms, cfg.irls);
                solved = pe.ok;
            }
            catch (const std::exception &)
            {
                solved = false;
            }
            out << id << ',' << name << ',';
            if (solved)
                out << pe.p[0] << ',' << pe.p[1] << ',' << pe.objective << ',' << pe.iterations
                    << ",0\n";
            else
                out << "nan,nan,nan,0,1\n";
        }
    }
    fs::create_directories(cfg.out_dir);
    const std::string path = (fs::path(cfg.out_dir) / "positions.csv").string();
    std::ofstream f(path);
    f << out.str();
    std::cout << "wrote " << path << "\n";
    return 0;
}

std::vector<CdfTable> cdfs_from_records(const std::vector<TrialRecord> &records)
{
    std::map<std::string, std::vector<double>> range_e, angle_e, pos_e;
    for (const auto &r : records)
    {
        const bool is_pos = r.method.find(':') != std::string::npos;
        if (is_pos)
            pos_e[r.method].push_back(r.failed ? std::numeric_limits<double>::quiet_NaN()
                                               : r.pos_err_m);
        else
        {
            range_e[r.method].push_back(r.failed ? std::numeric_limits<double>::quiet_NaN()
                                                 : r.range_err_m);
            if (!r.failed && !std::isnan(r.angle_err_rad))
                angle_e[r.method].push_back(r.angle_err_rad);
            else if (r.failed)
                angle_e[r.method].push_back(std::numeric_limits<double>::quiet_NaN());
        }
    }
    std::vector<CdfTable> cdfs;
    auto emit = [&](const std::map<std::string, std::vector<double>> &m, const char *suffix) {
        for (const auto &[name, errs] : m)
        {
            bool any_finite = false;
            for (double e : errs)
                any_finite |= !std::isnan(e);
            if (any_finite)
                cdfs.push_back(compute_cdf(name + std::string(suffix), errs));
        }
    };
    emit(range_e, ":range");
    emit(angle_e, ":angle");
    emit(pos_e, ":pos");
    return cdfs;
}

int cmd_e2e(const CommonOpts &o)
{
    ExperimentConfig cfg = resolve_config(o);
    const auto records = run_experiment(cfg);
    const auto cdfs = cdfs_from_records(records);
    emit_results(records, cdfs, {}, cfg.out_dir);
    std::cout << "wrote " << cfg.out_dir << "/records.csv (" << records.size() << " rows), "
              << cfg.out_dir << "/cdf.csv, " << cfg.out_dir << "/summary.json\n";
    return 0;
}

int cmd_bench(const CommonOpts &o, int calls)
{
    ExperimentConfig cfg = resolve_config(o);
    const auto benches = bench_runtimes(cfg, calls);
    emit_results({}, {}, benches, cfg.out_dir);
    std::cout << "method            median_ms      mean_ms\n";
    for (const auto &b : benches)
        std::cout << b.method << std::string(b.method.size() < 18 ? 18 - b.method.size() : 1, ' ')
                  << b.median_ns / 1e6 << "  " << b.mean_ns / 1e6 << "\n";
    std::cout << "wrote " << cfg.out_dir << "/bench.json\n";
    return 0;
}

int cmd_cdf(const CommonOpts &o, const std::string &records_path)
{
    ExperimentConfig cfg = resolve_config(o);
    std::ifstream in(records_path);
    if (!in)
        throw std::runtime_error("cdf: cannot open " + records_path);
    std::stringstream ss;
    ss << in.rdbuf();
    const auto records = records_from_csv(ss.str());
    const auto cdfs = cdfs_from_records(records);
    emit_results(records, cdfs, {}, cfg.out_dir);
    std::cout << "wrote " << cfg.out_dir << "/cdf.csv\n";
    return 0;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"multi-static backscatter range-angle estimation and localization"};
    app.require_subcommand(1);

    CommonOpts o_sim, o_est, o_loc, o_e2e, o_bench, o_cdf;
    std::string dataset_path, measurements_path, records_path;
    int bench_calls = 20;

    auto *sim = app.add_subcommand("simulate", "synthesize a dataset");
    add_common(sim, o_sim);
    auto *est = app.add_subcommand("estimate", "range-angle estimates from a dataset");
    add_common(est, o_est);
    est->add_option("--in", dataset_path, "dataset.json")->required();
    auto *loc = app.add_subcommand("localize", "positions from a measurement file");
    add_common(loc, o_loc);
    loc->add_option("--in", measurements_path, "measurements.json")->required();
    auto *e2e = app.add_subcommand("e2e", "full Monte-Carlo experiment");
    add_common(e2e, o_e2e);
    auto *bench = app.add_subcommand("bench", "estimator/positioner runtime medians");
    add_common(bench, o_bench);
    bench->add_option("--calls", bench_calls, "timed calls per method");
    auto *cdf = app.add_subcommand("cdf", "CDF tables from a records CSV");
    add_common(cdf, o_cdf);
    cdf->add_option("--in", records_path, "records.csv")->required();

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (sim->parsed())
            return cmd_simulate(o_sim);
        if (est->parsed())
            return cmd_estimate(o_est, dataset_path);
        if (loc->parsed())
            return cmd_localize(o_loc, measurements_path);
        if (e2e->parsed())
            return cmd_e2e(o_e2e);
        if (bench->parsed())
            return cmd_bench(o_bench, bench_calls);
        if (cdf->parsed())
            return cmd_cdf(o_cdf, records_path);
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
