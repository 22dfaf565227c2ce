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

#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "tagloc/harness.hpp"

namespace tagloc
{

namespace
{

using Clock = std::chrono::steady_clock;

long long elapsed_ns(Clock::time_point t0)
{
    return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t0).count();
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct MethodParams
{
    std::string name;
    double t_min = 0.0;
    double t_max = 0.0; // JRAC only
};

MethodParams method_params(const ExperimentConfig &cfg, const std::string &name)
{
    const EstimatorThresholds &t = cfg.thresholds;
    if (name == "fft2d")
        return {name, t.fft2d, 0.0};
    if (name == "music2d")
        return {name, t.music2d, 0.0};
    if (name == "srae")
        return {name, t.srae, 0.0};
    if (name == "jrac")
        return {name, t.jrac_min, t.jrac_max};
    if (name == "cir")
        return {name, t.cir, 0.0};
    throw std::runtime_error("unknown estimator '" + name + "'");
}

CarrierToa run_carrier(const MethodParams &mp, const CfrStack &h0, const EstimationSetup &setup)
{
    if (mp.name == "fft2d")
        return fft2d_carrier_toa(h0, setup, mp.t_min);
    if (mp.name == "music2d")
        return music2d_carrier_toa(h0, setup, mp.t_min);
    if (mp.name == "srae")
        return srae_carrier_toa(h0, setup, mp.t_min);
    if (mp.name == "jrac")
        return jrac_carrier_toa(h0, setup, mp.t_min, mp.t_max);
    return cir_carrier_toa(h0, setup, mp.t_min);
}

EstimateOutcome run_backscatter(const MethodParams &mp, const CfrStack &hb,
                                const EstimationSetup &setup, double tau0_true, double tau0_hat)
{
    if (mp.name == "fft2d")
        return fft2d_backscatter(hb, setup, tau0_true, tau0_hat, mp.t_min);
    if (mp.name == "music2d")
        return music2d_backscatter(hb, setup, tau0_true, tau0_hat, mp.t_min);
    if (mp.name == "srae")
        return srae_backscatter(hb, setup, tau0_true, tau0_hat, mp.t_min);
    if (mp.name == "jrac")
        return jrac_backscatter(hb, setup, tau0_true, tau0_hat, mp.t_min, mp.t_max);
    return cir_backscatter(hb, setup, tau0_true, tau0_hat, mp.t_min);
}

} // namespace

Scenario make_scenario(const ExperimentConfig &cfg, Rng &rng)
{
    Scenario sc;
    sc.dim = cfg.dim;
    sc.tx_positions = cfg.tx_positions;
    sc.rx_positions = cfg.rx_positions;
    sc.rx_array = ArrayGeometry::ula(cfg.rx_n_elements,
                                     kSpeedOfLight / cfg.waveform.center_freq_hz);
    sc.rx_frame = cfg.rx_frame;
    sc.waveform = cfg.waveform;
    sc.snr_db = cfg.snr_db;
    sc.seed = cfg.seed;

    const double x0 = cfg.region_x[0], x1 = cfg.region_x[1];
    const double y0 = cfg.region_y[0], y1 = cfg.region_y[1];
    if (cfg.random_tags)
    {
        const int n = cfg.tag_grid[0] * cfg.tag_grid[1];
        for (int i = 0; i < n; ++i)
            sc.tags.emplace_back(rng.uniform(x0, x1), rng.uniform(y0, y1));
    }
    else
    {
        // regular grid, cell-centered so tags stay inside the region
        for (int iy = 0; iy < cfg.tag_grid[1]; ++iy)
            for (int ix = 0; ix < cfg.tag_grid[0]; ++ix)
                sc.tags.emplace_back(x0 + (x1 - x0) * (ix + 0.5) / cfg.tag_grid[0],
                                     y0 + (y1 - y0) * (iy + 0.5) / cfg.tag_grid[1]);
    }
    for (int i = 0; i < cfg.n_scatterers; ++i)
        sc.scatterers.emplace_back(rng.uniform(x0, x1), rng.uniform(y0, y1));
    return sc;
}

std::vector<Position> resolve_angle_directions(const std::vector<double> &azimuths_antenna,
                                               const FrameTransform &frame,
                                               const MeasurementSet &ranges_only)
{
    const int dim = ranges_only.dim;
    std::vector<Position> out;
    out.reserve(azimuths_antenna.size());

    Position anchor = Position::zero(dim);
    bool have_anchor = false;
    if (!ranges_only.angles.empty())
        throw std::invalid_argument("resolve_angle_directions: expected a range-only set");
    if (static_cast<int>(ranges_only.ranges.size()) >= dim)
    {
        try
        {
            const PositionEstimate pre = irls_solve(ranges_only, IrlsConfig{5, 1e-6});
            if (pre.ok)
            {
                anchor = pre.p;
                have_anchor = true;
            }
        }
        catch (const std::exception &)
        {
        }
    }

    for (double theta : azimuths_antenna)
    {
        const Position front =
            antenna_to_world(frame, aoa_to_direction(Aoa{theta, 0.5 * kPi}, dim));
        Position pick = front;
        if (have_anchor && !ranges_only.rx_positions.empty())
        {
            // mirror flips the broadside component in the antenna frame
            Aoa mirrored{kPi - theta, 0.5 * kPi};
            if (mirrored.azimuth > kPi)
                mirrored.azimuth -= 2.0 * kPi;
            const Position back =
                antenna_to_world(frame, aoa_to_direction(mirrored, dim));
            const Position to_anchor = anchor - ranges_only.rx_positions[0];
            if (dot(back, to_anchor) > dot(front, to_anchor))
                pick = back;
        }
        out.push_back(pick);
    }
    return out;
}

namespace
{

// Records for one trial: per tag and estimator one estimation row, plus one
// row per (positioner, estimator) pair.
std::vector<TrialRecord> run_trial(const ExperimentConfig &cfg, const EstimationSetup &setup,
                                   int trial)
{
    Rng rng = Rng::substream(cfg.seed, static_cast<std::uint64_t>(trial));
    const Scenario sc = make_scenario(cfg, rng);
    const int n_tx = static_cast<int>(sc.tx_positions.size());
    const int n_tags = static_cast<int>(sc.tags.size());
    const Position &rx = sc.rx_positions[0];
    const double bw = sc.waveform.bandwidth_hz;

    // carrier channels, one per TX, shared by all tags of this trial
    std::vector<CfrStack> carrier(static_cast<std::size_t>(n_tx));
    std::vector<double> tau0_true(static_cast<std::size_t>(n_tx));
    for (int tx = 0; tx < n_tx; ++tx)
    {
        const PathSet leg =
            build_leg_paths(sc.tx_positions[static_cast<std::size_t>(tx)], rx, sc.scatterers, bw, rng);
        carrier[static_cast<std::size_t>(tx)] =
            add_noise(carrier_cfr(leg, sc.waveform, sc.rx_array, tx, 0), sc.snr_db, rng);
        tau0_true[static_cast<std::size_t>(tx)] =
            meters_to_delay(distance(sc.tx_positions[static_cast<std::size_t>(tx)], rx), bw);
    }

    // per-method carrier reference ToA (timed once, shared across tags)
    std::vector<MethodParams> methods;
    for (const std::string &name : cfg.estimators)
        methods.push_back(method_params(cfg, name));
    std::vector<std::vector<CarrierToa>> carrier_toa(methods.size());
    std::vector<long long> carrier_ns(methods.size(), 0);
    for (std::size_t mi = 0; mi < methods.size(); ++mi)
    {
        carrier_toa[mi].resize(static_cast<std::size_t>(n_tx));
        const auto t0 = Clock::now();
        for (int tx = 0; tx < n_tx; ++tx)
            carrier_toa[mi][static_cast<std::size_t>(tx)] =
                run_carrier(methods[mi], carrier[static_cast<std::size_t>(tx)], setup);
        carrier_ns[mi] = elapsed_ns(t0);
    }

    // world -> antenna frame for the folded ground-truth azimuth (the ULA
    // observes only the sine of the azimuth)
    const FrameTransform &frame = sc.rx_frame;
    auto folded_truth_azimuth = [&](const Position &tag) {
        if (distance(tag, rx) == 0.0)
            return 0.0; // tag on the RX: direction undefined
        const Position u_world = unit_direction(tag, rx);
        Position u_ant = Position::zero(sc.dim);
        for (int i = 0; i < sc.dim; ++i)
        {
            double s = 0.0;
            for (int j = 0; j < sc.dim; ++j)
                s += frame.m[j][i] * u_world[j]; // transpose = inverse
            u_ant[i] = s;
        }
        return std::asin(std::clamp(u_ant[1], -1.0, 1.0));
    };

    std::vector<TrialRecord> records;
    for (int tag = 0; tag < n_tags; ++tag)
    {
        const Position &tag_pos = sc.tags[static_cast<std::size_t>(tag)];
        const double theta_true = folded_truth_azimuth(tag_pos);

        // backscatter channels for this tag
        std::vector<CfrStack> hb(static_cast<std::size_t>(n_tx));
        std::vector<double> d_true(static_cast<std::size_t>(n_tx));
        for (int tx = 0; tx < n_tx; ++tx)
        {
            const Position &txp = sc.tx_positions[static_cast<std::size_t>(tx)];
            const PathSet tx_tag = build_leg_paths(txp, tag_pos, sc.scatterers, bw, rng);
            const PathSet tag_rx = build_leg_paths(tag_pos, rx, sc.scatterers, bw, rng);
            hb[static_cast<std::size_t>(tx)] = add_noise(
                backscatter_cfr(tx_tag, tag_rx, sc.waveform, sc.rx_array, tx, 0, tag), sc.snr_db,
                rng);
            d_true[static_cast<std::size_t>(tx)] = bistatic_range(tag_pos, txp, rx);
        }

        for (std::size_t mi = 0; mi < methods.size(); ++mi)
        {
            const MethodParams &mp = methods[mi];
            std::vector<EstimateOutcome> outcomes(static_cast<std::size_t>(n_tx));
            const auto t0 = Clock::now();
            for (int tx = 0; tx < n_tx; ++tx)
            {
                const CarrierToa &ct = carrier_toa[mi][static_cast<std::size_t>(tx)];
                if (!ct.ok())
                {
                    outcomes[static_cast<std::size_t>(tx)] =
                        EstimateOutcome{std::nullopt, ct.error};
                    continue;
                }
                outcomes[static_cast<std::size_t>(tx)] =
                    run_backscatter(mp, hb[static_cast<std::size_t>(tx)], setup,
                                    tau0_true[static_cast<std::size_t>(tx)], *ct.tau0_hat);
            }
            const long long est_ns = elapsed_ns(t0) + carrier_ns[mi] / n_tags;

            double range_err_sum = 0.0, angle_err_sum = 0.0;
            int n_ok = 0, n_angle = 0;
            for (int tx = 0; tx < n_tx; ++tx)
            {
                const auto &oc = outcomes[static_cast<std::size_t>(tx)];
                if (!oc.ok())
                    continue;
                ++n_ok;
                range_err_sum +=
                    std::abs(oc.estimate->bistatic_range_m - d_true[static_cast<std::size_t>(tx)]);
                if (oc.estimate->has_azimuth)
                {
                    ++n_angle;
                    angle_err_sum += std::abs(oc.estimate->azimuth_rad - theta_true);
                }
            }

            TrialRecord er;
            er.trial = trial;
            er.tag = tag;
            er.method = mp.name;
            er.time_ns = est_ns;
            er.failed = (n_ok == 0);
            er.range_err_m = (n_ok > 0) ? range_err_sum / n_ok : kNaN;
            er.angle_err_rad = (n_angle > 0) ? angle_err_sum / n_angle : kNaN;
            er.pos_err_m = kNaN;
            records.push_back(er);

            // measurement set for the positioners
            MeasurementSet ms;
            ms.dim = sc.dim;
            ms.tx_positions = sc.tx_positions;
            ms.rx_positions = sc.rx_positions;
            std::vector<double> azimuths;
            for (int tx = 0; tx < n_tx; ++tx)
            {
                const auto &oc = outcomes[static_cast<std::size_t>(tx)];
                if (!oc.ok())
                    continue;
                if (oc.estimate->bistatic_range_m > 0.0)
                    ms.ranges.push_back(RangeMeasurement{oc.estimate->bistatic_range_m,
                                                         cfg.sigma_range, tx, 0});
                if (oc.estimate->has_azimuth)
                    azimuths.push_back(oc.estimate->azimuth_rad);
            }
            for (const Position &u : resolve_angle_directions(azimuths, frame, ms))
                ms.angles.push_back(AngleMeasurement{u, cfg.kappa_angle, 0});

            for (const std::string &pos_name : cfg.positioners)
            {
                TrialRecord pr;
                pr.trial = trial;
                pr.tag = tag;
                pr.method = pos_name + ":" + mp.name;
                pr.range_err_m = kNaN;
                pr.angle_err_rad = kNaN;
                const auto p0 = Clock::now();
                PositionEstimate pe;
                bool solved = false;
                try
                {
                    if (pos_name == "ml_grid")
                    {
                        Box region{Position(cfg.grid_region_x[0], cfg.grid_region_y[0]),
                                   Position(cfg.grid_region_x[1], cfg.grid_region_y[1])};
                        pe = ml_grid_search(ms, region, cfg.grid_pitch);
                    }
                    else if (pos_name == "ml_gradient")
                        pe = ml_gradient_ascent(ms, cfg.gradient);
                    else
                        pe = irls_solve(ms, cfg.irls);
                    solved = pe.ok;
                }
                catch (const std::invalid_argument &)
                {
                    solved = false; // not enough usable measurements
                }
                pr.time_ns = elapsed_ns(p0);
                pr.failed = !solved;
                pr.pos_err_m = solved ? distance(pe.p, tag_pos) : kNaN;
                records.push_back(pr);
            }
        }
    }
    return records;
}

} // namespace

std::vector<TrialRecord> run_experiment(const ExperimentConfig &cfg)
{
    validate_config(cfg);
    const EstimationSetup setup{
        GridSpec::make(cfg.waveform.n_subcarriers, cfg.g_tau, cfg.g_theta),
        ArrayGeometry::ula(cfg.rx_n_elements, kSpeedOfLight / cfg.waveform.center_freq_hz),
        cfg.waveform.bandwidth_hz};

    std::vector<std::vector<TrialRecord>> per_trial(static_cast<std::size_t>(cfg.n_trials));
    const int n_threads = std::max(1, std::min(cfg.threads, cfg.n_trials));
    if (n_threads == 1)
    {
        for (int t = 0; t < cfg.n_trials; ++t)
            per_trial[static_cast<std::size_t>(t)] = run_trial(cfg, setup, t);
    }
    else
    {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n_threads));
        for (int w = 0; w < n_threads; ++w)
            pool.emplace_back([&]() {
                for (;;)
                {
                    const int t = next.fetch_add(1);
                    if (t >= cfg.n_trials)
                        return;
                    per_trial[static_cast<std::size_t>(t)] = run_trial(cfg, setup, t);
                }
            });
        for (auto &th : pool)
            th.join();
    }

    std::vector<TrialRecord> all;
    for (auto &v : per_trial)
        for (auto &r : v)
            all.push_back(std::move(r));
    return all;
}

std::vector<BenchResult> bench_runtimes(const ExperimentConfig &cfg, int calls, int warmup)
{
    validate_config(cfg);
    if (warmup < 1 || calls < 1)
        throw std::invalid_argument("bench_runtimes: need warmup >= 1 and calls >= 1");
    const EstimationSetup setup{
        GridSpec::make(cfg.waveform.n_subcarriers, cfg.g_tau, cfg.g_theta),
        ArrayGeometry::ula(cfg.rx_n_elements, kSpeedOfLight / cfg.waveform.center_freq_hz),
        cfg.waveform.bandwidth_hz};

    // one channel realization: first tag, first TX
    Rng rng = Rng::substream(cfg.seed, 0);
    const Scenario sc = make_scenario(cfg, rng);
    const Position &rx = sc.rx_positions[0];
    const Position &txp = sc.tx_positions[0];
    const Position &tag = sc.tags[0];
    const double bw = sc.waveform.bandwidth_hz;
    const CfrStack h0 = add_noise(
        carrier_cfr(build_leg_paths(txp, rx, sc.scatterers, bw, rng), sc.waveform, sc.rx_array),
        sc.snr_db, rng);
    const CfrStack hb =
        add_noise(backscatter_cfr(build_leg_paths(txp, tag, sc.scatterers, bw, rng),
                                  build_leg_paths(tag, rx, sc.scatterers, bw, rng), sc.waveform,
                                  sc.rx_array),
                  sc.snr_db, rng);
    const double tau0 = meters_to_delay(distance(txp, rx), bw);

    std::vector<BenchResult> results;
    auto run_estimator = [&](const MethodParams &mp) -> EstimateOutcome {
        if (mp.name == "fft2d")
            return fft2d_estimate(h0, hb, setup, tau0, mp.t_min);
        if (mp.name == "music2d")
            return music2d_estimate(h0, hb, setup, tau0, mp.t_min);
        if (mp.name == "srae")
            return srae_estimate(h0, hb, setup, tau0, mp.t_min);
        if (mp.name == "jrac")
            return jrac_estimate(h0, hb, setup, tau0, mp.t_min, mp.t_max);
        return cir_first_peak_range(h0, hb, setup, tau0, mp.t_min);
    };

    for (const std::string &name : cfg.estimators)
    {
        const MethodParams mp = method_params(cfg, name);
        for (int i = 0; i < warmup; ++i)
            (void)run_estimator(mp);
        std::vector<double> ns;
        ns.reserve(static_cast<std::size_t>(calls));
        for (int i = 0; i < calls; ++i)
        {
            const auto t0 = Clock::now();
            (void)run_estimator(mp);
            ns.push_back(static_cast<double>(elapsed_ns(t0)));
        }
        results.push_back(BenchResult{name, median(ns), mean(ns), calls});
    }

    // positioning benches use the measurements of the first configured
    // estimator that produces them (all four TXs)
    MeasurementSet ms;
    ms.dim = sc.dim;
    ms.tx_positions = sc.tx_positions;
    ms.rx_positions = sc.rx_positions;
    {
        std::vector<double> azimuths;
        const MethodParams mp = method_params(cfg, cfg.estimators.empty()
                                                       ? std::string("jrac")
                                                       : cfg.estimators.front());
        for (int tx = 0; tx < static_cast<int>(sc.tx_positions.size()); ++tx)
        {
            const Position &t2 = sc.tx_positions[static_cast<std::size_t>(tx)];
            Rng r2 = Rng::substream(cfg.seed, 1000 + static_cast<std::uint64_t>(tx));
            const CfrStack c2 = add_noise(
                carrier_cfr(build_leg_paths(t2, rx, sc.scatterers, bw, r2), sc.waveform,
                            sc.rx_array, tx, 0),
                sc.snr_db, r2);
            const CfrStack b2 =
                add_noise(backscatter_cfr(build_leg_paths(t2, tag, sc.scatterers, bw, r2),
                                          build_leg_paths(tag, rx, sc.scatterers, bw, r2),
                                          sc.waveform, sc.rx_array, tx, 0, 0),
                          sc.snr_db, r2);
            const double t0t = meters_to_delay(distance(t2, rx), bw);
            EstimateOutcome oc;
            if (mp.name == "jrac")
                oc = jrac_estimate(c2, b2, setup, t0t, mp.t_min, mp.t_max);
            else if (mp.name == "fft2d")
                oc = fft2d_estimate(c2, b2, setup, t0t, mp.t_min);
            else if (mp.name == "music2d")
                oc = music2d_estimate(c2, b2, setup, t0t, mp.t_min);
            else if (mp.name == "srae")
                oc = srae_estimate(c2, b2, setup, t0t, mp.t_min);
            else
                oc = cir_first_peak_range(c2, b2, setup, t0t, mp.t_min);
            if (!oc.ok())
                continue;
            ms.ranges.push_back(
                RangeMeasurement{oc.estimate->bistatic_range_m, cfg.sigma_range, tx, 0});
            if (oc.estimate->has_azimuth)
                azimuths.push_back(oc.estimate->azimuth_rad);
        }
        for (const Position &u : resolve_angle_directions(azimuths, sc.rx_frame, ms))
            ms.angles.push_back(AngleMeasurement{u, cfg.kappa_angle, 0});
    }
    if (static_cast<int>(ms.ranges.size() + ms.angles.size()) >= sc.dim)
    {
        const Box region{Position(cfg.grid_region_x[0], cfg.grid_region_y[0]),
                         Position(cfg.grid_region_x[1], cfg.grid_region_y[1])};
        auto run_positioner = [&](const std::string &name) {
            if (name == "ml_grid")
                return ml_grid_search(ms, region, cfg.grid_pitch);
            if (name == "ml_gradient")
                return ml_gradient_ascent(ms, cfg.gradient);
            return irls_solve(ms, cfg.irls);
        };
        for (const std::string &name : cfg.positioners)
        {
            for (int i = 0; i < warmup; ++i)
                (void)run_positioner(name);
            std::vector<double> ns;
            ns.reserve(static_cast<std::size_t>(calls));
            for (int i = 0; i < calls; ++i)
            {
                const auto t0 = Clock::now();
                (void)run_positioner(name);
                ns.push_back(static_cast<double>(elapsed_ns(t0)));
            }
            results.push_back(BenchResult{name, median(ns), mean(ns), calls});
        }
    }
    return results;
}

} // namespace tagloc
