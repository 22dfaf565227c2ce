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

#ifndef TAGLOC_GEOMETRY_HPP
#define TAGLOC_GEOMETRY_HPP

#include <array>
#include <complex>
#include <vector>

namespace tagloc
{

inline constexpr double kSpeedOfLight = 299792458.0; // m/s
inline constexpr double kPi = 3.14159265358979323846;

// Point or direction in D-dimensional space, D in {2, 3}.
class Position
{
  public:
    Position() : dim_(2), c_{0.0, 0.0, 0.0} {}
    Position(double x, double y) : dim_(2), c_{x, y, 0.0} {}
    Position(double x, double y, double z) : dim_(3), c_{x, y, z} {}

    static Position zero(int dim);

    int dim() const { return dim_; }
    double operator[](int i) const { return c_[i]; }
    double &operator[](int i) { return c_[i]; }

    Position &operator+=(const Position &o);
    Position &operator-=(const Position &o);
    Position &operator*=(double s);

  private:
    int dim_;
    std::array<double, 3> c_;
};

Position operator+(Position a, const Position &b);
Position operator-(Position a, const Position &b);
Position operator*(double s, Position a);
double dot(const Position &a, const Position &b);
double norm(const Position &a);
double distance(const Position &a, const Position &b);

// Azimuth/elevation pair. Elevation is pi/2 for planar (D = 2) setups,
// where all angles live in the horizontal plane.
struct Aoa
{
    double azimuth = 0.0;          // rad, [-pi, pi]
    double elevation = 0.5 * kPi;  // rad, [0, pi]
};

// Receiver antenna array: element offsets relative to element 0 (meters,
// local frame) plus the carrier wavelength used for phase steering.
struct ArrayGeometry
{
    std::vector<std::array<double, 3>> element_offsets;
    double wavelength = 0.0;

    int size() const { return static_cast<int>(element_offsets.size()); }

    // Uniform linear array with half-wavelength spacing along the local
    // y-axis; element 0 sits at the origin.
    static ArrayGeometry ula(int n_elements, double wavelength);
};

// Orthonormal rotation/reflection mapping the antenna frame to the world
// frame. Stored row-major; only the leading dim x dim block is used.
struct FrameTransform
{
    int dim = 2;
    std::array<std::array<double, 3>, 3> m{};

    static FrameTransform identity(int dim);
    // Validates orthonormality to 1e-12.
    static FrameTransform from_rows(const std::vector<std::vector<double>> &rows);
};

// Total TX -> tag -> RX path length. Always >= the TX-RX baseline.
double bistatic_range(const Position &tag, const Position &tx, const Position &rx);

// Unit vector pointing from the RX towards the tag.
Position unit_direction(const Position &tag, const Position &rx);

// Azimuth (and elevation for D = 3) of a unit direction vector.
Aoa direction_to_aoa(const Position &u);

// Unit direction for a given azimuth/elevation, matching direction_to_aoa.
Position aoa_to_direction(const Aoa &aoa, int dim);

// Per-element complex response of the array to a plane wave from the given
// direction; element 0 is always 1 and all entries have unit modulus.
std::vector<std::complex<double>> steering_vector(const ArrayGeometry &array, const Aoa &aoa);

// Bandwidth-normalized delay (in samples) <-> path length (meters).
double delay_to_meters(double tau_samples, double bandwidth_hz);
double meters_to_delay(double meters, double bandwidth_hz);

// Apply the antenna-to-world transform to a direction vector.
Position antenna_to_world(const FrameTransform &t, const Position &v);

} // namespace tagloc

#endif
