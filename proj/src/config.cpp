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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "tagloc/harness.hpp"

namespace tagloc
{

namespace
{

using nlohmann::json;

const std::set<std::string> kEstimatorNames{"fft2d", "music2d", "srae", "jrac", "cir"};
const std::set<std::string> kPositionerNames{"ml_grid", "ml_gradient", "irls"};

void reject_unknown(const json &j, const std::set<std::string> &allowed, const std::string &ctx)
{
    for (auto it = j.begin(); it != j.end(); ++it)
        if (allowed.find(it.key()) == allowed.end())
            throw std::runtime_error("config: unknown key '" + it.key() + "' in " + ctx);
}

std::vector<Position> parse_positions(const json &a, int dim)
{
    std::vector<Position> v;
    for (const auto &e : a)
    {
        if (!e.is_array() || static_cast<int>(e.size()) != dim)
            throw std::runtime_error("config: positions must be arrays of length dim");
        if (dim == 2)
            v.emplace_back(e[0].get<double>(), e[1].get<double>());
        else
            v.emplace_back(e[0].get<double>(), e[1].get<double>(), e[2].get<double>());
    }
    return v;
}

json positions_json(const std::vector<Position> &v)
{
    json a = json::array();
    for (const auto &p : v)
    {
        json e = json::array();
        for (int i = 0; i < p.dim(); ++i)
            e.push_back(p[i]);
        a.push_back(e);
    }
    return a;
}

void parse_pair(const json &a, double out[2], const std::string &ctx)
{
    if (!a.is_array() || a.size() != 2)
        throw std::runtime_error("config: " + ctx + " must be a 2-element array");
    out[0] = a[0].get<double>();
    out[1] = a[1].get<double>();
}

} // namespace

ExperimentConfig default_config()
{
    ExperimentConfig cfg;
    cfg.tx_positions = {Position(0.0, 0.0), Position(0.0, 6.0), Position(-18.0, 6.0),
                        Position(-18.0, 0.0)};
    cfg.rx_positions = {Position(-9.0, 3.0)};
    return cfg;
}

void validate_config(const ExperimentConfig &cfg)
{
    if (cfg.n_trials < 1)
        throw std::runtime_error("config: n_trials must be >= 1");
    if (cfg.tx_positions.empty() || cfg.rx_positions.empty())
        throw std::runtime_error("config: need at least one TX and one RX");
    for (const auto &e : cfg.estimators)
        if (kEstimatorNames.find(e) == kEstimatorNames.end())
            throw std::runtime_error("config: unknown estimator '" + e + "'");
    for (const auto &p : cfg.positioners)
        if (kPositionerNames.find(p) == kPositionerNames.end())
            throw std::runtime_error("config: unknown positioner '" + p + "'");
    if (cfg.g_tau < cfg.waveform.n_subcarriers || cfg.g_theta < cfg.rx_n_elements)
        throw std::runtime_error("config: grids must be at least as fine as the data");
    if (cfg.n_scatterers < 0)
        throw std::runtime_error("config: n_scatterers must be >= 0");
    if (cfg.threads < 1)
        throw std::runtime_error("config: threads must be >= 1");
}

ExperimentConfig load_config(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("config: cannot open " + path);
    json j;
    try
    {
        in >> j;
    }
    catch (const json::exception &e)
    {
        throw std::runtime_error(std::string("config: parse error: ") + e.what());
    }

    ExperimentConfig cfg = default_config();
    try
    {
        reject_unknown(j, {"scenario", "estimation", "positioning", "experiment"}, "root");

        if (j.contains("scenario"))
        {
            const json &s = j["scenario"];
            reject_unknown(s,
                           {"dim", "tx_positions", "rx_positions", "rx_n_elements", "rx_frame",
                            "region", "tag_grid", "random_tags", "n_scatterers", "waveform",
                            "snr_db"},
                           "scenario");
            if (s.contains("dim"))
                cfg.dim = s["dim"].get<int>();
            if (s.contains("tx_positions"))
                cfg.tx_positions = parse_positions(s["tx_positions"], cfg.dim);
            if (s.contains("rx_positions"))
                cfg.rx_positions = parse_positions(s["rx_positions"], cfg.dim);
            if (s.contains("rx_n_elements"))
                cfg.rx_n_elements = s["rx_n_elements"].get<int>();
            if (s.contains("rx_frame"))
            {
                std::vector<std::vector<double>> rows;
                for (const auto &r : s["rx_frame"])
                    rows.push_back(r.get<std::vector<double>>());
                cfg.rx_frame = FrameTransform::from_rows(rows);
            }
            if (s.contains("region"))
            {
                reject_unknown(s["region"], {"x", "y"}, "scenario.region");
                parse_pair(s["region"].at("x"), cfg.region_x, "region.x");
                parse_pair(s["region"].at("y"), cfg.region_y, "region.y");
            }
            if (s.contains("tag_grid"))
            {
                cfg.tag_grid[0] = s["tag_grid"].at(0).get<int>();
                cfg.tag_grid[1] = s["tag_grid"].at(1).get<int>();
            }
            if (s.contains("random_tags"))
                cfg.random_tags = s["random_tags"].get<bool>();
            if (s.contains("n_scatterers"))
                cfg.n_scatterers = s["n_scatterers"].get<int>();
            if (s.contains("waveform"))
            {
                const json &w = s["waveform"];
                reject_unknown(
                    w, {"n_subcarriers", "bandwidth_hz", "center_freq_hz", "shift_hz", "n_symbols"},
                    "scenario.waveform");
                if (w.contains("n_subcarriers"))
                    cfg.waveform.n_subcarriers = w["n_subcarriers"].get<int>();
                if (w.contains("bandwidth_hz"))
                    cfg.waveform.bandwidth_hz = w["bandwidth_hz"].get<double>();
                if (w.contains("center_freq_hz"))
                    cfg.waveform.center_freq_hz = w["center_freq_hz"].get<double>();
                if (w.contains("shift_hz"))
                    cfg.waveform.shift_hz = w["shift_hz"].get<double>();
                if (w.contains("n_symbols"))
                    cfg.waveform.n_symbols = w["n_symbols"].get<int>();
            }
            if (s.contains("snr_db"))
            {
                if (s["snr_db"].is_string() && s["snr_db"].get<std::string>() == "inf")
                    cfg.snr_db = std::numeric_limits<double>::infinity();
                else
                    cfg.snr_db = s["snr_db"].get<double>();
            }
        }

        if (j.contains("estimation"))
        {
            const json &e = j["estimation"];
            reject_unknown(e, {"g_tau", "g_theta", "estimators", "thresholds"}, "estimation");
            if (e.contains("g_tau"))
                cfg.g_tau = e["g_tau"].get<int>();
            if (e.contains("g_theta"))
                cfg.g_theta = e["g_theta"].get<int>();
            if (e.contains("estimators"))
                cfg.estimators = e["estimators"].get<std::vector<std::string>>();
            if (e.contains("thresholds"))
            {
                const json &t = e["thresholds"];
                reject_unknown(t, {"fft2d", "music2d", "srae", "jrac_min", "jrac_max", "cir"},
                               "estimation.thresholds");
                if (t.contains("fft2d"))
                    cfg.thresholds.fft2d = t["fft2d"].get<double>();
                if (t.contains("music2d"))
                    cfg.thresholds.music2d = t["music2d"].get<double>();
                if (t.contains("srae"))
                    cfg.thresholds.srae = t["srae"].get<double>();
                if (t.contains("jrac_min"))
                    cfg.thresholds.jrac_min = t["jrac_min"].get<double>();
                if (t.contains("jrac_max"))
                    cfg.thresholds.jrac_max = t["jrac_max"].get<double>();
                if (t.contains("cir"))
                    cfg.thresholds.cir = t["cir"].get<double>();
            }
        }

        if (j.contains("positioning"))
        {
            const json &p = j["positioning"];
            reject_unknown(p,
                           {"positioners", "grid_pitch", "grid_region", "step_set", "k_max",
                            "eps_stop", "irls_iterations", "irls_eps", "sigma_range",
                            "kappa_angle"},
                           "positioning");
            if (p.contains("positioners"))
                cfg.positioners = p["positioners"].get<std::vector<std::string>>();
            if (p.contains("grid_pitch"))
                cfg.grid_pitch = p["grid_pitch"].get<double>();
            if (p.contains("grid_region"))
            {
                reject_unknown(p["grid_region"], {"x", "y"}, "positioning.grid_region");
                parse_pair(p["grid_region"].at("x"), cfg.grid_region_x, "grid_region.x");
                parse_pair(p["grid_region"].at("y"), cfg.grid_region_y, "grid_region.y");
            }
            if (p.contains("step_set"))
                cfg.gradient.step_set = p["step_set"].get<std::vector<double>>();
            if (p.contains("k_max"))
                cfg.gradient.k_max = p["k_max"].get<int>();
            if (p.contains("eps_stop"))
                cfg.gradient.eps_stop = p["eps_stop"].get<double>();
            if (p.contains("irls_iterations"))
                cfg.irls.iterations = p["irls_iterations"].get<int>();
            if (p.contains("irls_eps"))
                cfg.irls.eps_weight = p["irls_eps"].get<double>();
            if (p.contains("sigma_range"))
                cfg.sigma_range = p["sigma_range"].get<double>();
            if (p.contains("kappa_angle"))
                cfg.kappa_angle = p["kappa_angle"].get<double>();
        }

        if (j.contains("experiment"))
        {
            const json &x = j["experiment"];
            reject_unknown(x, {"n_trials", "seed", "threads", "out_dir"}, "experiment");
            if (x.contains("n_trials"))
                cfg.n_trials = x["n_trials"].get<int>();
            if (x.contains("seed"))
                cfg.seed = x["seed"].get<std::uint64_t>();
            if (x.contains("threads"))
                cfg.threads = x["threads"].get<int>();
            if (x.contains("out_dir"))
                cfg.out_dir = x["out_dir"].get<std::string>();
        }
    }
    catch (const json::exception &e)
    {
        throw std::runtime_error(std::string("config: schema violation: ") + e.what());
    }

    validate_config(cfg);
    return cfg;
}

void save_config(const std::string &path, const ExperimentConfig &cfg)
{
    json j;
    json s;
    s["dim"] = cfg.dim;
    s["tx_positions"] = positions_json(cfg.tx_positions);
    s["rx_positions"] = positions_json(cfg.rx_positions);
    s["rx_n_elements"] = cfg.rx_n_elements;
    json frame = json::array();
    for (int r = 0; r < cfg.rx_frame.dim; ++r)
    {
        json row = json::array();
        for (int c = 0; c < cfg.rx_frame.dim; ++c)
            row.push_back(cfg.rx_frame.m[r][c]);
        frame.push_back(row);
    }
    s["rx_frame"] = frame;
    s["region"] = {{"x", {cfg.region_x[0], cfg.region_x[1]}},
                   {"y", {cfg.region_y[0], cfg.region_y[1]}}};
    s["tag_grid"] = {cfg.tag_grid[0], cfg.tag_grid[1]};
    s["random_tags"] = cfg.random_tags;
    s["n_scatterers"] = cfg.n_scatterers;
    s["waveform"] = {{"n_subcarriers", cfg.waveform.n_subcarriers},
                     {"bandwidth_hz", cfg.waveform.bandwidth_hz},
                     {"center_freq_hz", cfg.waveform.center_freq_hz},
                     {"shift_hz", cfg.waveform.shift_hz},
                     {"n_symbols", cfg.waveform.n_symbols}};
    if (std::isinf(cfg.snr_db))
        s["snr_db"] = "inf";
    else
        s["snr_db"] = cfg.snr_db;
    j["scenario"] = s;

    j["estimation"] = {{"g_tau", cfg.g_tau},
                       {"g_theta", cfg.g_theta},
                       {"estimators", cfg.estimators},
                       {"thresholds",
                        {{"fft2d", cfg.thresholds.fft2d},
                         {"music2d", cfg.thresholds.music2d},
                         {"srae", cfg.thresholds.srae},
                         {"jrac_min", cfg.thresholds.jrac_min},
                         {"jrac_max", cfg.thresholds.jrac_max},
                         {"cir", cfg.thresholds.cir}}}};

    j["positioning"] = {{"positioners", cfg.positioners},
                        {"grid_pitch", cfg.grid_pitch},
                        {"grid_region",
                         {{"x", {cfg.grid_region_x[0], cfg.grid_region_x[1]}},
                          {"y", {cfg.grid_region_y[0], cfg.grid_region_y[1]}}}},
                        {"step_set", cfg.gradient.step_set},
                        {"k_max", cfg.gradient.k_max},
                        {"eps_stop", cfg.gradient.eps_stop},
                        {"irls_iterations", cfg.irls.iterations},
                        {"irls_eps", cfg.irls.eps_weight},
                        {"sigma_range", cfg.sigma_range},
                        {"kappa_angle", cfg.kappa_angle}};

    j["experiment"] = {{"n_trials", cfg.n_trials},
                       {"seed", cfg.seed},
                       {"threads", cfg.threads},
                       {"out_dir", cfg.out_dir}};

    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("config: cannot write " + path);
    out << j.dump(2) << "\n";
}

} // namespace tagloc
