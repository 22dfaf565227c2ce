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

#include "tagloc/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace tagloc
{

static void check_same_dim(const Position &a, const Position &b, const char *where)
{
    if (a.dim() != b.dim())
        throw std::invalid_argument(std::string(where) + ": dimension mismatch");
}

Position Position::zero(int dim)
{
    if (dim == 2)
        return Position(0.0, 0.0);
    if (dim == 3)
        return Position(0.0, 0.0, 0.0);
    throw std::invalid_argument("Position::zero: dim must be 2 or 3");
}

Position &Position::operator+=(const Position &o)
{
    check_same_dim(*this, o, "Position::operator+=");
    for (int i = 0; i < dim_; ++i)
        c_[i] += o.c_[i];
    return *this;
}

Position &Position::operator-=(const Position &o)
{
    check_same_dim(*this, o, "Position::operator-=");
    for (int i = 0; i < dim_; ++i)
        c_[i] -= o.c_[i];
    return *this;
}

Position &Position::operator*=(double s)
{
    for (int i = 0; i < dim_; ++i)
        c_[i] *= s;
    return *this;
}

Position operator+(Position a, const Position &b)
{
    a += b;
    return a;
}

Position operator-(Position a, const Position &b)
{
    a -= b;
    return a;
}

Position operator*(double s, Position a)
{
    a *= s;
    return a;
}

double dot(const Position &a, const Position &b)
{
    check_same_dim(a, b, "dot");
    double s = 0.0;
    for (int i = 0; i < a.dim(); ++i)
        s += a[i] * b[i];
    return s;
}

double norm(const Position &a)
{
    return std::sqrt(dot(a, a));
}

double distance(const Position &a, const Position &b)
{
    return norm(a - b);
}

ArrayGeometry ArrayGeometry::ula(int n_elements, double wavelength)
{
    if (n_elements < 1)
        throw std::invalid_argument("ArrayGeometry::ula: need at least one element");
    if (wavelength <= 0.0)
        throw std::invalid_argument("ArrayGeometry::ula: wavelength must be positive");
    ArrayGeometry g;
    g.wavelength = wavelength;
    g.element_offsets.resize(static_cast<std::size_t>(n_elements));
    for (int i = 0; i < n_elements; ++i)
        g.element_offsets[static_cast<std::size_t>(i)] = {0.0, 0.5 * wavelength * i, 0.0};
    return g;
}

FrameTransform FrameTransform::identity(int dim)
{
    if (dim != 2 && dim != 3)
        throw std::invalid_argument("FrameTransform::identity: dim must be 2 or 3");
    FrameTransform t;
    t.dim = dim;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            t.m[i][j] = (i == j) ? 1.0 : 0.0;
    return t;
}

FrameTransform FrameTransform::from_rows(const std::vector<std::vector<double>> &rows)
{
    const int dim = static_cast<int>(rows.size());
    if (dim != 2 && dim != 3)
        throw std::invalid_argument("FrameTransform::from_rows: dim must be 2 or 3");
    FrameTransform t = identity(dim);
    for (int i = 0; i < dim; ++i)
    {
        if (static_cast<int>(rows[i].size()) != dim)
            throw std::invalid_argument("FrameTransform::from_rows: ragged matrix");
        for (int j = 0; j < dim; ++j)
            t.m[i][j] = rows[i][j];
    }
    // Omega^T Omega = I within 1e-12
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j)
        {
            double s = 0.0;
            for (int k = 0; k < dim; ++k)
                s += t.m[k][i] * t.m[k][j];
            const double expected = (i == j) ? 1.0 : 0.0;
            if (std::abs(s - expected) > 1e-12)
                throw std::invalid_argument("FrameTransform::from_rows: matrix is not orthonormal");
        }
    return t;
}

double bistatic_range(const Position &tag, const Position &tx, const Position &rx)
{
    check_same_dim(tag, tx, "bistatic_range");
    check_same_dim(tag, rx, "bistatic_range");
    return distance(tag, tx) + distance(tag, rx);
}

Position unit_direction(const Position &tag, const Position &rx)
{
    Position d = tag - rx;
    const double n = norm(d);
    if (n == 0.0)
        throw std::invalid_argument("unit_direction: tag and rx coincide");
    d *= 1.0 / n;
    return d;
}

Aoa direction_to_aoa(const Position &u)
{
    Aoa a;
    if (u.dim() == 2)
    {
        a.azimuth = std::atan2(u[1], u[0]);
        a.elevation = 0.5 * kPi;
    }
    else
    {
        a.elevation = std::acos(std::clamp(u[2], -1.0, 1.0));
        a.azimuth = std::atan2(u[1], u[0]);
    }
    return a;
}

Position aoa_to_direction(const Aoa &aoa, int dim)
{
    if (dim == 2)
        return Position(std::cos(aoa.azimuth), std::sin(aoa.azimuth));
    return Position(std::sin(aoa.elevation) * std::cos(aoa.azimuth),
                    std::sin(aoa.elevation) * std::sin(aoa.azimuth),
                    std::cos(aoa.elevation));
}

std::vector<std::complex<double>> steering_vector(const ArrayGeometry &array, const Aoa &aoa)
{
    if (array.wavelength <= 0.0)
        throw std::invalid_argument("steering_vector: wavelength must be positive");
    const double k = 2.0 * kPi / array.wavelength;
    const double ux = std::cos(aoa.azimuth) * std::sin(aoa.elevation);
    const double uy = std::sin(aoa.azimuth) * std::sin(aoa.elevation);
    const double uz = std::cos(aoa.elevation);
    std::vector<std::complex<double>> a(array.element_offsets.size());
    for (std::size_t i = 0; i < array.element_offsets.size(); ++i)
    {
        const auto &o = array.element_offsets[i];
        const double phase = k * (o[0] * ux + o[1] * uy + o[2] * uz);
        a[i] = std::complex<double>(std::cos(phase), std::sin(phase));
    }
    return a;
}

double delay_to_meters(double tau_samples, double bandwidth_hz)
{
    if (bandwidth_hz <= 0.0)
        throw std::invalid_argument("delay_to_meters: bandwidth must be positive");
    return kSpeedOfLight * tau_samples / bandwidth_hz;
}

double meters_to_delay(double meters, double bandwidth_hz)
{
    if (bandwidth_hz <= 0.0)
        throw std::invalid_argument("meters_to_delay: bandwidth must be positive");
    return bandwidth_hz * meters / kSpeedOfLight;
}

Position antenna_to_world(const FrameTransform &t, const Position &v)
{
    if (t.dim != v.dim())
        throw std::invalid_argument("antenna_to_world: dimension mismatch");
    Position r = Position::zero(t.dim);
    for (int i = 0; i < t.dim; ++i)
    {
        double s = 0.0;
        for (int j = 0; j < t.dim; ++j)
            s += t.m[i][j] * v[j];
        r[i] = s;
    }
    return r;
}

} // namespace tagloc
