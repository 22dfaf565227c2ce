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

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tagloc/channel.hpp"

using namespace tagloc;
using Catch::Approx;

namespace
{

Scenario small_scenario(int n_scatterers, std::uint64_t seed = 1)
{
    Scenario sc;
    sc.dim = 2;
    sc.tx_positions = {Position(0, 0), Position(0, 6)};
    sc.rx_positions = {Position(-9, 3)};
    sc.rx_array = ArrayGeometry::ula(4, kSpeedOfLight / 897.5e6);
    sc.rx_frame = FrameTransform::identity(2);
    sc.tags = {Position(-4, 2)};
    Rng srng(seed + 77);
    for (int i = 0; i < n_scatterers; ++i)
        sc.scatterers.emplace_back(srng.uniform(-18.0, 0.0), srng.uniform(0.0, 6.0));
    sc.waveform = WaveformConfig{16, 40e6, 897.5e6, 45e6, 4};
    sc.snr_db = 5.0;
    sc.seed = seed;
    return sc;
}

// direct summation of the per-subcarrier channel model
CMat direct_cfr(const PathSet &paths, const WaveformConfig &wf, const ArrayGeometry &array)
{
    const int ns = wf.n_subcarriers;
    const int na = array.size();
    CMat h(ns, na);
    for (const Path &p : paths.paths)
    {
        const auto a = steering_vector(array, p.aoa);
        for (int m = 0; m < ns; ++m)
        {
            const double phase = -2.0 * kPi * (m - ns / 2) * p.delay / ns;
            const cxd f = p.gain * cxd(std::cos(phase), std::sin(phase));
            for (int n = 0; n < na; ++n)
                h(m, n) += f * a[static_cast<std::size_t>(n)];
        }
    }
    return h;
}

double max_abs_diff(const CMat &a, const CMat &b)
{
    double m = 0.0;
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j)
            m = std::max(m, std::abs(a(i, j) - b(i, j)));
    return m;
}

} // namespace

TEST_CASE("path construction", "[channel]")
{
    SECTION("no scatterers leaves the line of sight only")
    {
        Scenario sc = small_scenario(0);
        Rng rng(2);
        const TriplePaths tp = build_paths(sc, 0, 0, 0, rng);
        CHECK(tp.carrier.size() == 1);
        CHECK(tp.tx_tag.size() == 1);
        CHECK(tp.tag_rx.size() == 1);
        const double want =
            meters_to_delay(distance(sc.tx_positions[0], sc.rx_positions[0]), 40e6);
        CHECK(tp.carrier.paths[0].delay == Approx(want));
    }

    SECTION("tag on the TX gives a zero-delay leg")
    {
        Scenario sc = small_scenario(0);
        sc.tags[0] = sc.tx_positions[0];
        Rng rng(2);
        const TriplePaths tp = build_paths(sc, 0, 0, 0, rng);
        CHECK(tp.tx_tag.paths[0].delay == 0.0);
    }

    SECTION("two scatterers give three paths per leg and nine bistatic paths")
    {
        Scenario sc = small_scenario(2);
        Rng rng(2);
        const TriplePaths tp = build_paths(sc, 0, 0, 0, rng);
        CHECK(tp.tx_tag.size() == 3);
        CHECK(tp.tag_rx.size() == 3);
        const PathSet b = compose_bistatic(tp.tx_tag, tp.tag_rx, sc.waveform);
        CHECK(b.size() == 9);
        // first path is the line of sight with the smallest delay
        for (const Path &p : b.paths)
            CHECK(p.delay >= b.paths[0].delay - 1e-12);
        CHECK(b.paths[0].delay ==
              Approx(tp.tx_tag.paths[0].delay + tp.tag_rx.paths[0].delay));
    }

    SECTION("index validation")
    {
        Scenario sc = small_scenario(0);
        Rng rng(2);
        CHECK_THROWS_AS(build_paths(sc, 5, 0, 0, rng), std::out_of_range);
        CHECK_THROWS_AS(build_paths(sc, 0, 9, 0, rng), std::out_of_range);
    }
}

TEST_CASE("carrier synthesis", "[channel]")
{
    const WaveformConfig wf{16, 40e6, 897.5e6, 45e6, 3};
    const ArrayGeometry array = ArrayGeometry::ula(4, 0.334);

    SECTION("single broadside path at zero delay is all ones")
    {
        PathSet ps;
        ps.paths.push_back(Path{cxd(1.0, 0.0), 0.0, Aoa{0.0, 0.5 * kPi}});
        const CfrStack s = carrier_cfr(ps, wf, array);
        REQUIRE(s.symbols.size() == 3);
        for (int m = 0; m < 16; ++m)
            for (int n = 0; n < 4; ++n)
            {
                CHECK(s.symbols[0](m, n).real() == Approx(1.0));
                CHECK(s.symbols[0](m, n).imag() == Approx(0.0).margin(1e-12));
            }
    }

    SECTION("unit delay advances phase per subcarrier, constant across antennas")
    {
        PathSet ps;
        ps.paths.push_back(Path{cxd(1.0, 0.0), 1.0, Aoa{0.0, 0.5 * kPi}});
        const CfrStack s = carrier_cfr(ps, wf, array);
        for (int m = 0; m < 16; ++m)
        {
            const double phase = -2.0 * kPi * (m - 8) / 16.0;
            const cxd want(std::cos(phase), std::sin(phase));
            for (int n = 0; n < 4; ++n)
                CHECK(std::abs(s.symbols[0](m, n) - want) < 1e-12);
        }
    }

    SECTION("multi-path synthesis equals the direct summation oracle")
    {
        Scenario sc = small_scenario(3);
        Rng rng(5);
        const TriplePaths tp = build_paths(sc, 0, 0, 0, rng);
        const CfrStack s = carrier_cfr(tp.carrier, sc.waveform, sc.rx_array);
        const CMat ref = direct_cfr(tp.carrier, sc.waveform, sc.rx_array);
        CHECK(max_abs_diff(s.symbols[0], ref) < 1e-12);
        // static channel: all symbols identical
        for (std::size_t k = 1; k < s.symbols.size(); ++k)
            CHECK(max_abs_diff(s.symbols[k], s.symbols[0]) == 0.0);
    }
}

TEST_CASE("backscatter composition", "[channel]")
{
    const WaveformConfig wf{16, 40e6, 897.5e6, 45e6, 2};

    SECTION("single-path legs compose plainly")
    {
        PathSet l1, l2;
        l1.paths.push_back(Path{cxd(1.0, 0.0), 3.0, Aoa{}});
        l2.paths.push_back(Path{cxd(1.0, 0.0), 0.0, Aoa{0.3, 0.5 * kPi}});
        const PathSet b = compose_bistatic(l1, l2, wf);
        REQUIRE(b.size() == 1);
        CHECK(b.paths[0].delay == Approx(3.0));
        CHECK(b.paths[0].gain.real() == Approx(1.0));
        CHECK(b.paths[0].aoa.azimuth == Approx(0.3));
    }

    SECTION("tag-side delay of half a shift period flips the sign")
    {
        PathSet l1, l2;
        l1.paths.push_back(Path{cxd(1.0, 0.0), 1.0, Aoa{}});
        const double tau2 = wf.bandwidth_hz / (2.0 * wf.shift_hz);
        l2.paths.push_back(Path{cxd(1.0, 0.0), tau2, Aoa{}});
        const PathSet b = compose_bistatic(l1, l2, wf);
        CHECK(b.paths[0].gain.real() == Approx(-1.0));
        CHECK(b.paths[0].gain.imag() == Approx(0.0).margin(1e-12));
    }

    SECTION("2 x 3 legs give 6 bistatic paths matching the double-sum oracle")
    {
        Rng rng(31);
        PathSet l1, l2;
        for (int i = 0; i < 2; ++i)
            l1.paths.push_back(Path{cxd(rng.normal(), rng.normal()),
                                    (i == 0 ? 1.0 : 1.0 + rng.uniform(0.1, 2.0)), Aoa{}});
        for (int i = 0; i < 3; ++i)
            l2.paths.push_back(Path{cxd(rng.normal(), rng.normal()),
                                    (i == 0 ? 0.5 : 0.5 + rng.uniform(0.1, 2.0)),
                                    Aoa{rng.uniform(-1.0, 1.0), 0.5 * kPi}});
        const ArrayGeometry array = ArrayGeometry::ula(4, 0.334);
        const CfrStack s = backscatter_cfr(l1, l2, wf, array);
        REQUIRE(compose_bistatic(l1, l2, wf).size() == 6);

        // direct double-loop evaluation of the per-subcarrier product model
        CMat ref(16, 4);
        for (int m = 0; m < 16; ++m)
        {
            const int n_sub = m - 8;
            for (const Path &p1 : l1.paths)
                for (const Path &p2 : l2.paths)
                {
                    const double ph1 = -2.0 * kPi * n_sub * (p1.delay + p2.delay) / 16.0;
                    const double ph2 = -2.0 * kPi * wf.shift_hz * p2.delay / wf.bandwidth_hz;
                    const cxd c = p1.gain * p2.gain * cxd(std::cos(ph1), std::sin(ph1)) *
                                  cxd(std::cos(ph2), std::sin(ph2));
                    const auto a = steering_vector(array, p2.aoa);
                    for (int n = 0; n < 4; ++n)
                        ref(m, n) += c * a[static_cast<std::size_t>(n)];
                }
        }
        CHECK(max_abs_diff(s.symbols[0], ref) < 1e-12);
    }
}

TEST_CASE("noise injection", "[channel]")
{
    Scenario sc = small_scenario(1);
    Rng rng(8);
    const TriplePaths tp = build_paths(sc, 0, 0, 0, rng);
    const CfrStack clean = carrier_cfr(tp.carrier, sc.waveform, sc.rx_array);

    SECTION("infinite snr passes through")
    {
        Rng nrng(1);
        const CfrStack s = add_noise(clean, std::numeric_limits<double>::infinity(), nrng);
        CHECK(max_abs_diff(s.symbols[0], clean.symbols[0]) == 0.0);
    }

    SECTION("5 dB empirical snr within 0.2 dB")
    {
        // widen the stack so the estimate has > 1e5 entries
        WaveformConfig wf = sc.waveform;
        wf.n_symbols = 2000;
        const CfrStack big = carrier_cfr(tp.carrier, wf, sc.rx_array);
        Rng nrng(2);
        const CfrStack noisy = add_noise(big, 5.0, nrng);
        double sig = 0.0, noise = 0.0;
        std::size_t count = 0;
        for (std::size_t k = 0; k < big.symbols.size(); ++k)
        {
            const cxd *c = big.symbols[k].data();
            const cxd *n = noisy.symbols[k].data();
            const std::size_t sz = static_cast<std::size_t>(16) * 4;
            for (std::size_t i = 0; i < sz; ++i)
            {
                sig += std::norm(c[i]);
                noise += std::norm(n[i] - c[i]);
                ++count;
            }
        }
        REQUIRE(count >= 100000);
        const double snr_db = 10.0 * std::log10(sig / noise);
        CHECK(snr_db == Approx(5.0).margin(0.2));
    }

    SECTION("explicit variance on a zero stack")
    {
        CfrStack zero = clean;
        for (CMat &h : zero.symbols)
            for (int i = 0; i < h.rows(); ++i)
                for (int j = 0; j < h.cols(); ++j)
                    h(i, j) = 0.0;
        WaveformConfig wf = sc.waveform;
        wf.n_symbols = 3000;
        zero.symbols.assign(static_cast<std::size_t>(wf.n_symbols), zero.symbols[0]);
        Rng nrng(3);
        const double sigma2 = 0.37;
        const CfrStack noisy = add_noise_with_variance(zero, sigma2, nrng);
        double acc = 0.0;
        std::size_t count = 0;
        for (const CMat &h : noisy.symbols)
        {
            const cxd *d = h.data();
            for (std::size_t i = 0; i < static_cast<std::size_t>(16) * 4; ++i)
            {
                acc += std::norm(d[i]);
                ++count;
            }
        }
        CHECK(acc / count == Approx(sigma2).epsilon(0.05));
        // snr-driven noise on a zero stack has nothing to scale against
        Rng nrng2(4);
        const CfrStack same = add_noise(zero, 5.0, nrng2);
        CHECK(max_abs_diff(same.symbols[0], zero.symbols[0]) == 0.0);
    }

    SECTION("seeded generation is reproducible")
    {
        Rng a(99), b(99);
        const CfrStack na = add_noise(clean, 5.0, a);
        const CfrStack nb = add_noise(clean, 5.0, b);
        CHECK(max_abs_diff(na.symbols[0], nb.symbols[0]) == 0.0);
    }
}

TEST_CASE("dataset round-trip", "[channel]")
{
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "tagloc_test_dataset";
    fs::create_directories(dir);
    const std::string path = (dir / "ds.json").string();

    Scenario sc = small_scenario(2);
    Rng rng(4);
    std::vector<CfrStack> stacks;
    for (int tx = 0; tx < 2; ++tx)
    {
        const TriplePaths tp = build_paths(sc, 0, tx, 0, rng);
        stacks.push_back(add_noise(carrier_cfr(tp.carrier, sc.waveform, sc.rx_array, tx, 0),
                                   sc.snr_db, rng));
        stacks.push_back(add_noise(
            backscatter_cfr(tp.tx_tag, tp.tag_rx, sc.waveform, sc.rx_array, tx, 0, 0), sc.snr_db,
            rng));
    }
    save_dataset(path, sc, stacks);
    const auto [sc2, stacks2] = load_dataset(path);

    REQUIRE(stacks2.size() == stacks.size());
    CHECK(sc2.tags.size() == sc.tags.size());
    CHECK(sc2.waveform.n_subcarriers == sc.waveform.n_subcarriers);
    CHECK(sc2.snr_db == sc.snr_db);
    for (std::size_t i = 0; i < stacks.size(); ++i)
    {
        CHECK(stacks2[i].kind == stacks[i].kind);
        CHECK(stacks2[i].tx_index == stacks[i].tx_index);
        REQUIRE(stacks2[i].symbols.size() == stacks[i].symbols.size());
        for (std::size_t k = 0; k < stacks[i].symbols.size(); ++k)
            CHECK(max_abs_diff(stacks2[i].symbols[k], stacks[i].symbols[k]) == 0.0);
    }

    SECTION("truncated file fails with a schema error")
    {
        std::string text;
        {
            std::ifstream in(path);
            std::stringstream ss;
            ss << in.rdbuf();
            text = ss.str();
        }
        const std::string half = text.substr(0, text.size() / 2);
        const std::string bad = (dir / "bad.json").string();
        {
            std::ofstream out(bad);
            out << half;
        }
        CHECK_THROWS_AS(load_dataset(bad), std::runtime_error);
    }

    SECTION("missing file")
    {
        CHECK_THROWS_AS(load_dataset((dir / "nope.json").string()), std::runtime_error);
    }
    fs::remove_all(dir);
}
