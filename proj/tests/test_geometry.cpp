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

#include "tagloc/geometry.hpp"
#include "tagloc/util.hpp"

using namespace tagloc;
using Catch::Approx;

TEST_CASE("bistatic range basics", "[geometry]")
{
    CHECK(bistatic_range(Position(0, 3), Position(0, 0), Position(4, 0)) == Approx(8.0));
    CHECK(bistatic_range(Position(-9, 3), Position(0, 0), Position(-18, 0)) ==
          Approx(2.0 * std::sqrt(90.0)));
    // degenerate: tag sitting on the TX
    CHECK(bistatic_range(Position(1, 2), Position(1, 2), Position(4, 6)) ==
          Approx(distance(Position(1, 2), Position(4, 6))));
    CHECK_THROWS_AS(bistatic_range(Position(0, 0, 0), Position(0, 0), Position(1, 1)),
                    std::invalid_argument);
}

TEST_CASE("bistatic range never undercuts the baseline", "[geometry]")
{
    Rng rng(7);
    for (int i = 0; i < 500; ++i)
    {
        const Position tag(rng.uniform(-20, 20), rng.uniform(-20, 20));
        const Position tx(rng.uniform(-20, 20), rng.uniform(-20, 20));
        const Position rx(rng.uniform(-20, 20), rng.uniform(-20, 20));
        CHECK(bistatic_range(tag, tx, rx) >= distance(tx, rx) - 1e-12);
    }
}

TEST_CASE("unit direction and azimuth recovery", "[geometry]")
{
    const Position u1 = unit_direction(Position(5, 0), Position(0, 0));
    CHECK(u1[0] == Approx(1.0));
    CHECK(u1[1] == Approx(0.0).margin(1e-15));

    const Position u2 = unit_direction(Position(0, 7), Position(0, 0));
    CHECK(u2[0] == Approx(0.0).margin(1e-15));
    CHECK(u2[1] == Approx(1.0));

    const Position u3 = unit_direction(Position(-9, 6), Position(-9, 3));
    CHECK(u3[0] == Approx(0.0).margin(1e-15));
    CHECK(u3[1] == Approx(1.0));

    CHECK_THROWS_AS(unit_direction(Position(1, 1), Position(1, 1)), std::invalid_argument);

    Rng rng(3);
    for (int i = 0; i < 200; ++i)
    {
        const double theta = rng.uniform(-kPi + 1e-6, kPi - 1e-6);
        const Position u = unit_direction(
            Position(3.0 * std::cos(theta), 3.0 * std::sin(theta)), Position(0, 0));
        CHECK(norm(u) == Approx(1.0).epsilon(1e-12));
        CHECK(direction_to_aoa(u).azimuth == Approx(theta).margin(1e-12));
    }
}

TEST_CASE("steering vector of a half-wavelength ULA", "[geometry]")
{
    const ArrayGeometry ula = ArrayGeometry::ula(4, 0.334);
    const double half_pi = 0.5 * kPi;

    auto a0 = steering_vector(ula, Aoa{0.0, half_pi});
    for (const auto &v : a0)
    {
        CHECK(v.real() == Approx(1.0));
        CHECK(v.imag() == Approx(0.0).margin(1e-12));
    }

    auto a90 = steering_vector(ula, Aoa{half_pi, half_pi});
    CHECK(a90[1].real() == Approx(-1.0));
    CHECK(a90[2].real() == Approx(1.0));
    CHECK(a90[3].real() == Approx(-1.0));

    auto a30 = steering_vector(ula, Aoa{kPi / 6.0, half_pi});
    CHECK(a30[1].real() == Approx(0.0).margin(1e-12));
    CHECK(a30[1].imag() == Approx(1.0));
    CHECK(a30[2].real() == Approx(-1.0));
    CHECK(a30[3].imag() == Approx(-1.0));

    for (const auto &v : a30)
        CHECK(std::abs(v) == Approx(1.0));

    // conjugation mirrors the angle for a linear array
    auto am30 = steering_vector(ula, Aoa{-kPi / 6.0, half_pi});
    for (std::size_t i = 0; i < am30.size(); ++i)
        CHECK(std::abs(am30[i] - std::conj(a30[i])) < 1e-12);
}

TEST_CASE("delay and range conversions", "[geometry]")
{
    CHECK(meters_to_delay(kSpeedOfLight / 40e6, 40e6) == Approx(1.0));
    CHECK(delay_to_meters(0.0, 40e6) == 0.0);
    CHECK(delay_to_meters(1.0, 39.36e6) == Approx(299792458.0 / 39.36e6));
    CHECK(delay_to_meters(1.0, 39.36e6) == Approx(7.617).epsilon(1e-4));

    Rng rng(11);
    for (int i = 0; i < 100; ++i)
    {
        const double d = rng.uniform(0.0, 500.0);
        CHECK(delay_to_meters(meters_to_delay(d, 40e6), 40e6) == Approx(d).epsilon(1e-12));
    }
}

TEST_CASE("antenna to world transforms", "[geometry]")
{
    const auto ident = FrameTransform::identity(2);
    const Position v(1, 0);
    const Position r1 = antenna_to_world(ident, v);
    CHECK(r1[0] == Approx(1.0));

    const auto swap = FrameTransform::from_rows({{0, 1}, {1, 0}});
    const Position r2 = antenna_to_world(swap, v);
    CHECK(r2[0] == Approx(0.0).margin(1e-15));
    CHECK(r2[1] == Approx(1.0));

    const double c = std::cos(kPi / 2), s = std::sin(kPi / 2);
    const auto rot = FrameTransform::from_rows({{c, -s}, {s, c}});
    const Position r3 = antenna_to_world(rot, v);
    CHECK(r3[0] == Approx(0.0).margin(1e-15));
    CHECK(r3[1] == Approx(1.0));

    CHECK(norm(r3) == Approx(1.0));
    CHECK_THROWS_AS(FrameTransform::from_rows({{1, 1}, {0, 1}}), std::invalid_argument);
}
