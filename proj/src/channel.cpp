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

#include "tagloc/channel.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace tagloc
{

// The arrival direction of every path is taken at `dst`.
PathSet build_leg_paths(const Position &src, const Position &dst,
                        const std::vector<Position> &scatterers, double bandwidth_hz, Rng &rng)
{
    PathSet ps;
    const double los_len = distance(src, dst);
    std::vector<double> lengths;
    lengths.push_back(los_len);
    std::vector<Position> last_hop;
    last_hop.push_back(src);
    for (const Position &s : scatterers)
    {
        lengths.push_back(distance(src, s) + distance(s, dst));
        last_hop.push_back(s);
    }

    for (std::size_t i = 0; i < lengths.size(); ++i)
    {
        Path p;
        p.delay = meters_to_delay(lengths[i], bandwidth_hz);
        const double mag = (lengths[i] > 0.0 && los_len > 0.0) ? los_len / lengths[i] : 1.0;
        const double phase = rng.uniform(0.0, 2.0 * kPi);
        p.gain = mag * cxd(std::cos(phase), std::sin(phase));
        if (!(distance(last_hop[i], dst) > 0.0))
            p.aoa = Aoa{}; // degenerate zero-length hop; direction undefined
        else
            p.aoa = direction_to_aoa(unit_direction(last_hop[i], dst));
        ps.paths.push_back(p);
    }
    return ps;
}

TriplePaths build_paths(const Scenario &sc, int tag_index, int tx_index, int rx_index, Rng &rng)
{
    if (tag_index < 0 || tag_index >= static_cast<int>(sc.tags.size()))
        throw std::out_of_range("build_paths: tag index out of range");
    if (tx_index < 0 || tx_index >= static_cast<int>(sc.tx_positions.size()))
        throw std::out_of_range("build_paths: tx index out of range");
    if (rx_index < 0 || rx_index >= static_cast<int>(sc.rx_positions.size()))
        throw std::out_of_range("build_paths: rx index out of range");

    const Position &tx = sc.tx_positions[static_cast<std::size_t>(tx_index)];
    const Position &rx = sc.rx_positions[static_cast<std::size_t>(rx_index)];
    const Position &tag = sc.tags[static_cast<std::size_t>(tag_index)];
    const double bw = sc.waveform.bandwidth_hz;

    TriplePaths tp;
    tp.carrier = build_leg_paths(tx, rx, sc.scatterers, bw, rng);
    tp.tx_tag = build_leg_paths(tx, tag, sc.scatterers, bw, rng);
    tp.tag_rx = build_leg_paths(tag, rx, sc.scatterers, bw, rng);
    return tp;
}

namespace
{

CfrStack synthesize(const PathSet &paths, const WaveformConfig &wf, const ArrayGeometry &array,
                    const SynthesisOptions &opt)
{
    const int ns = wf.n_subcarriers;
    const int na = array.size();
    const int nsym = wf.n_symbols;
    if (ns < 2 || nsym < 1)
        throw std::invalid_argument("channel synthesis: need n_subcarriers >= 2 and n_symbols >= 1");

    // steering vectors and delay responses per path
    const int npath = paths.size();
    std::vector<std::vector<cxd>> steer(static_cast<std::size_t>(npath));
    std::vector<std::vector<cxd>> fvec(static_cast<std::size_t>(npath), std::vector<cxd>(ns));
    for (int l = 0; l < npath; ++l)
    {
        steer[l] = steering_vector(array, paths.paths[l].aoa);
        for (int m = 0; m < ns; ++m)
        {
            const double phase = -2.0 * kPi * (m - ns / 2) * paths.paths[l].delay / ns;
            fvec[l][m] = cxd(std::cos(phase), std::sin(phase));
        }
    }

    CfrStack stack;
    stack.symbols.reserve(static_cast<std::size_t>(nsym));
    const bool jitter = opt.gain_jitter != 0.0;
    if (jitter && opt.rng == nullptr)
        throw std::invalid_argument("channel synthesis: gain jitter requires an rng");

    CMat base(ns, na);
    if (!jitter)
    {
        for (int l = 0; l < npath; ++l)
        {
            const cxd g = paths.paths[l].gain;
            for (int m = 0; m < ns; ++m)
            {
                const cxd fm = g * fvec[l][m];
                cxd *row = base.row(m);
                for (int n = 0; n < na; ++n)
                    row[n] += fm * steer[l][n];
            }
        }
        for (int k = 0; k < nsym; ++k)
            stack.symbols.push_back(base);
        return stack;
    }

    const double scale = opt.gain_jitter / std::sqrt(2.0);
    for (int k = 0; k < nsym; ++k)
    {
        CMat h(ns, na);
        for (int l = 0; l < npath; ++l)
        {
            const cxd wobble(1.0 + scale * opt.rng->normal(), scale * opt.rng->normal());
            const cxd g = paths.paths[l].gain * wobble;
            for (int m = 0; m < ns; ++m)
            {
                const cxd fm = g * fvec[l][m];
                cxd *row = h.row(m);
                for (int n = 0; n < na; ++n)
                    row[n] += fm * steer[l][n];
            }
        }
        stack.symbols.push_back(std::move(h));
    }
    return stack;
}

} // namespace

CfrStack carrier_cfr(const PathSet &paths, const WaveformConfig &wf, const ArrayGeometry &array,
                     int tx_index, int rx_index, const SynthesisOptions &opt)
{
    CfrStack s = synthesize(paths, wf, array, opt);
    s.kind = ChannelKind::carrier;
    s.tx_index = tx_index;
    s.rx_index = rx_index;
    s.tag_index = -1;
    return s;
}

PathSet compose_bistatic(const PathSet &tx_tag, const PathSet &tag_rx, const WaveformConfig &wf)
{
    PathSet out;
    const int l1 = tx_tag.size();
    const int l2 = tag_rx.size();
    out.paths.resize(static_cast<std::size_t>(l1) * l2);
    for (int m = 0; m < l2; ++m)
    {
        const Path &p2 = tag_rx.paths[static_cast<std::size_t>(m)];
        const double shift_phase = -2.0 * kPi * wf.shift_hz * p2.delay / wf.bandwidth_hz;
        const cxd shift(std::cos(shift_phase), std::sin(shift_phase));
        for (int l = 0; l < l1; ++l)
        {
            const Path &p1 = tx_tag.paths[static_cast<std::size_t>(l)];
            Path b;
            b.gain = p1.gain * p2.gain * shift;
            b.delay = p1.delay + p2.delay;
            b.aoa = p2.aoa;
            out.paths[static_cast<std::size_t>(l + l1 * m)] = b;
        }
    }
    return out;
}

CfrStack backscatter_cfr(const PathSet &tx_tag, const PathSet &tag_rx, const WaveformConfig &wf,
                         const ArrayGeometry &array, int tx_index, int rx_index, int tag_index,
                         const SynthesisOptions &opt)
{
    CfrStack s = synthesize(compose_bistatic(tx_tag, tag_rx, wf), wf, array, opt);
    s.kind = ChannelKind::backscatter;
    s.tx_index = tx_index;
    s.rx_index = rx_index;
    s.tag_index = tag_index;
    return s;
}

CfrStack add_noise_with_variance(CfrStack stack, double noise_variance, Rng &rng)
{
    if (noise_variance < 0.0)
        throw std::invalid_argument("add_noise_with_variance: negative variance");
    if (noise_variance == 0.0)
        return stack;
    const double s = std::sqrt(noise_variance / 2.0);
    for (CMat &h : stack.symbols)
    {
        cxd *d = h.data();
        const std::size_t count = static_cast<std::size_t>(h.rows()) * h.cols();
        for (std::size_t i = 0; i < count; ++i)
            d[i] += cxd(s * rng.normal(), s * rng.normal());
    }
    return stack;
}

CfrStack add_noise(CfrStack stack, double snr_db, Rng &rng)
{
    if (!std::isfinite(snr_db))
    {
        if (snr_db > 0.0)
            return stack; // +inf: noiseless
        throw std::invalid_argument("add_noise: snr must be finite or +inf");
    }
    double power = 0.0;
    std::size_t count = 0;
    for (const CMat &h : stack.symbols)
    {
        const cxd *d = h.data();
        const std::size_t n = static_cast<std::size_t>(h.rows()) * h.cols();
        for (std::size_t i = 0; i < n; ++i)
            power += std::norm(d[i]);
        count += n;
    }
    if (count == 0)
        return stack;
    const double mean_power = power / static_cast<double>(count);
    const double sigma2 = mean_power / std::pow(10.0, snr_db / 10.0);
    return add_noise_with_variance(std::move(stack), sigma2, rng);
}

// ---------------------------------------------------------------------------
// Dataset persistence
// ---------------------------------------------------------------------------

namespace
{

using nlohmann::json;

json position_to_json(const Position &p)
{
    json a = json::array();
    for (int i = 0; i < p.dim(); ++i)
        a.push_back(p[i]);
    return a;
}

Position position_from_json(const json &a)
{
    if (!a.is_array() || (a.size() != 2 && a.size() != 3))
        throw std::runtime_error("dataset: position must be a 2- or 3-vector");
    if (a.size() == 2)
        return Position(a[0].get<double>(), a[1].get<double>());
    return Position(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
}

json positions_to_json(const std::vector<Position> &v)
{
    json a = json::array();
    for (const auto &p : v)
        a.push_back(position_to_json(p));
    return a;
}

std::vector<Position> positions_from_json(const json &a)
{
    std::vector<Position> v;
    for (const auto &e : a)
        v.push_back(position_from_json(e));
    return v;
}

json scenario_to_json(const Scenario &sc)
{
    json j;
    j["dim"] = sc.dim;
    j["tx_positions"] = positions_to_json(sc.tx_positions);
    j["rx_positions"] = positions_to_json(sc.rx_positions);
    json arr;
    arr["wavelength"] = sc.rx_array.wavelength;
    json offs = json::array();
    for (const auto &o : sc.rx_array.element_offsets)
        offs.push_back(json::array({o[0], o[1], o[2]}));
    arr["element_offsets"] = offs;
    j["rx_array"] = arr;
    json frame = json::array();
    for (int r = 0; r < sc.rx_frame.dim; ++r)
    {
        json row = json::array();
        for (int c = 0; c < sc.rx_frame.dim; ++c)
            row.push_back(sc.rx_frame.m[r][c]);
        frame.push_back(row);
    }
    j["rx_frame"] = frame;
    j["tags"] = positions_to_json(sc.tags);
    j["scatterers"] = positions_to_json(sc.scatterers);
    json wf;
    wf["n_subcarriers"] = sc.waveform.n_subcarriers;
    wf["bandwidth_hz"] = sc.waveform.bandwidth_hz;
    wf["center_freq_hz"] = sc.waveform.center_freq_hz;
    wf["shift_hz"] = sc.waveform.shift_hz;
    wf["n_symbols"] = sc.waveform.n_symbols;
    j["waveform"] = wf;
    j["snr_db"] = sc.snr_db;
    j["seed"] = sc.seed;
    return j;
}

Scenario scenario_from_json(const json &j)
{
    Scenario sc;
    sc.dim = j.at("dim").get<int>();
    sc.tx_positions = positions_from_json(j.at("tx_positions"));
    sc.rx_positions = positions_from_json(j.at("rx_positions"));
    const json &arr = j.at("rx_array");
    sc.rx_array.wavelength = arr.at("wavelength").get<double>();
    sc.rx_array.element_offsets.clear();
    for (const auto &o : arr.at("element_offsets"))
        sc.rx_array.element_offsets.push_back({o.at(0).get<double>(), o.at(1).get<double>(), o.at(2).get<double>()});
    std::vector<std::vector<double>> rows;
    for (const auto &r : j.at("rx_frame"))
        rows.push_back(r.get<std::vector<double>>());
    sc.rx_frame = FrameTransform::from_rows(rows);
    sc.tags = positions_from_json(j.at("tags"));
    sc.scatterers = positions_from_json(j.at("scatterers"));
    const json &wf = j.at("waveform");
    sc.waveform.n_subcarriers = wf.at("n_subcarriers").get<int>();
    sc.waveform.bandwidth_hz = wf.at("bandwidth_hz").get<double>();
    sc.waveform.center_freq_hz = wf.at("center_freq_hz").get<double>();
    sc.waveform.shift_hz = wf.at("shift_hz").get<double>();
    sc.waveform.n_symbols = wf.at("n_symbols").get<int>();
    sc.snr_db = j.at("snr_db").get<double>();
    sc.seed = j.at("seed").get<std::uint64_t>();
    return sc;
}

} // namespace

void save_dataset(const std::string &path, const Scenario &sc, const std::vector<CfrStack> &stacks)
{
    json j;
    j["version"] = 1;
    j["scenario"] = scenario_to_json(sc);
    json jstacks = json::array();
    for (const CfrStack &s : stacks)
    {
        json js;
        js["kind"] = (s.kind == ChannelKind::carrier) ? "carrier" : "backscatter";
        js["tx_index"] = s.tx_index;
        js["rx_index"] = s.rx_index;
        js["tag_index"] = s.tag_index;
        const int rows = s.symbols.empty() ? 0 : s.symbols.front().rows();
        const int cols = s.symbols.empty() ? 0 : s.symbols.front().cols();
        js["n_subcarriers"] = rows;
        js["n_antennas"] = cols;
        json syms = json::array();
        for (const CMat &h : s.symbols)
        {
            if (h.rows() != rows || h.cols() != cols)
                throw std::runtime_error("save_dataset: inconsistent symbol dimensions");
            json re = json::array(), im = json::array();
            const cxd *d = h.data();
            const std::size_t n = static_cast<std::size_t>(rows) * cols;
            for (std::size_t i = 0; i < n; ++i)
            {
                re.push_back(d[i].real());
                im.push_back(d[i].imag());
            }
            syms.push_back(json{{"re", re}, {"im", im}});
        }
        js["symbols"] = syms;
        jstacks.push_back(std::move(js));
    }
    j["stacks"] = jstacks;

    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("save_dataset: cannot open " + path);
    out << j.dump();
    if (!out)
        throw std::runtime_error("save_dataset: write failed for " + path);
}

std::pair<Scenario, std::vector<CfrStack>> load_dataset(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("load_dataset: cannot open " + path);
    json j;
    try
    {
        in >> j;
    }
    catch (const json::exception &e)
    {
        throw std::runtime_error(std::string("load_dataset: schema violation: ") + e.what());
    }
    try
    {
        if (j.at("version").get<int>() != 1)
            throw std::runtime_error("load_dataset: unsupported dataset version");
        Scenario sc = scenario_from_json(j.at("scenario"));
        std::vector<CfrStack> stacks;
        for (const auto &js : j.at("stacks"))
        {
            CfrStack s;
            const std::string kind = js.at("kind").get<std::string>();
            if (kind == "carrier")
                s.kind = ChannelKind::carrier;
            else if (kind == "backscatter")
                s.kind = ChannelKind::backscatter;
            else
                throw std::runtime_error("load_dataset: unknown stack kind " + kind);
            s.tx_index = js.at("tx_index").get<int>();
            s.rx_index = js.at("rx_index").get<int>();
            s.tag_index = js.at("tag_index").get<int>();
            const int rows = js.at("n_subcarriers").get<int>();
            const int cols = js.at("n_antennas").get<int>();
            for (const auto &sym : js.at("symbols"))
            {
                const auto &re = sym.at("re");
                const auto &im = sym.at("im");
                const std::size_t n = static_cast<std::size_t>(rows) * cols;
                if (re.size() != n || im.size() != n)
                    throw std::runtime_error("load_dataset: symbol entry count mismatch");
                CMat h(rows, cols);
                cxd *d = h.data();
                for (std::size_t i = 0; i < n; ++i)
                    d[i] = cxd(re[i].get<double>(), im[i].get<double>());
                s.symbols.push_back(std::move(h));
            }
            stacks.push_back(std::move(s));
        }
        return {std::move(sc), std::move(stacks)};
    }
    catch (const json::exception &e)
    {
        throw std::runtime_error(std::string("load_dataset: schema violation: ") + e.what());
    }
}

} // namespace tagloc
