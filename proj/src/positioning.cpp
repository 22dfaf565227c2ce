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

#include "tagloc/positioning.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "tagloc/linalg.hpp"

namespace tagloc
{

namespace
{

const Position &tx_of(const MeasurementSet &m, const RangeMeasurement &r)
{
    return m.tx_positions.at(static_cast<std::size_t>(r.tx_index));
}

const Position &rx_of(const MeasurementSet &m, int rx_index)
{
    return m.rx_positions.at(static_cast<std::size_t>(rx_index));
}

void validate(const MeasurementSet &m)
{
    if (m.dim != 2 && m.dim != 3)
        throw std::invalid_argument("MeasurementSet: dim must be 2 or 3");
    for (const auto &r : m.ranges)
    {
        if (!(r.d_hat > 0.0) || !(r.sigma > 0.0))
            throw std::invalid_argument("RangeMeasurement: d_hat and sigma must be positive");
        tx_of(m, r);
        rx_of(m, r.rx_index);
    }
    for (const auto &a : m.angles)
    {
        if (std::abs(norm(a.u_hat) - 1.0) > 1e-9)
            throw std::invalid_argument("AngleMeasurement: u_hat must be a unit vector");
        if (!(a.kappa > 0.0))
            throw std::invalid_argument("AngleMeasurement: kappa must be positive");
        rx_of(m, a.rx_index);
    }
    if (static_cast<int>(m.ranges.size() + m.angles.size()) < m.dim)
        throw std::invalid_argument("MeasurementSet: too few measurements for the dimension");
}

} // namespace

double log_likelihood(const Position &p, const MeasurementSet &m)
{
    double ll = 0.0;
    for (const auto &r : m.ranges)
    {
        const double d = distance(tx_of(m, r), p) + distance(rx_of(m, r.rx_index), p);
        const double res = r.d_hat - d;
        ll -= res * res / (2.0 * r.sigma * r.sigma);
    }
    for (const auto &a : m.angles)
    {
        const Position diff = p - rx_of(m, a.rx_index);
        const double dist = norm(diff);
        if (dist == 0.0)
            throw std::domain_error("log_likelihood: position coincides with an RX");
        ll += a.kappa * dot(a.u_hat, diff) / dist;
    }
    return ll;
}

Position grad_log_likelihood(const Position &p, const MeasurementSet &m)
{
    Position g = Position::zero(p.dim());
    for (const auto &r : m.ranges)
    {
        const Position &tx = tx_of(m, r);
        const Position &rx = rx_of(m, r.rx_index);
        const double dt = distance(tx, p);
        const double dr = distance(rx, p);
        if (dt == 0.0 || dr == 0.0)
            throw std::domain_error("grad_log_likelihood: position coincides with a node");
        const double res = r.d_hat - dt - dr;
        const double w = res / (r.sigma * r.sigma);
        // d/dp (||p-tx|| + ||p-rx||)
        const Position dir = (1.0 / dt) * (p - tx) + (1.0 / dr) * (p - rx);
        g += w * dir;
    }
    for (const auto &a : m.angles)
    {
        const Position diff = p - rx_of(m, a.rx_index);
        const double dist = norm(diff);
        if (dist == 0.0)
            throw std::domain_error("grad_log_likelihood: position coincides with an RX");
        // kappa * (I/r - x x^T / r^3) u_hat
        const double proj = dot(diff, a.u_hat) / (dist * dist * dist);
        g += (a.kappa / dist) * a.u_hat - (a.kappa * proj) * diff;
    }
    return g;
}

PositionEstimate ml_grid_search(const MeasurementSet &m, const Box &region, double eps)
{
    validate(m);
    if (!(eps > 0.0))
        throw std::invalid_argument("ml_grid_search: eps must be positive");
    if (region.lo.dim() != m.dim || region.hi.dim() != m.dim)
        throw std::invalid_argument("ml_grid_search: region dimension mismatch");
    std::array<int, 3> counts{1, 1, 1};
    for (int i = 0; i < m.dim; ++i)
    {
        const double span = region.hi[i] - region.lo[i];
        if (span < 0.0)
            throw std::invalid_argument("ml_grid_search: empty region");
        counts[static_cast<std::size_t>(i)] = static_cast<int>(std::floor(span / eps)) + 1;
    }

    PositionEstimate best;
    best.method = "ml_grid";
    best.objective = -std::numeric_limits<double>::infinity();
    Position p = Position::zero(m.dim);
    for (int iz = 0; iz < counts[2]; ++iz)
        for (int iy = 0; iy < counts[1]; ++iy)
            for (int ix = 0; ix < counts[0]; ++ix)
            {
                p[0] = region.lo[0] + eps * ix;
                p[1] = region.lo[1] + eps * iy;
                if (m.dim == 3)
                    p[2] = region.lo[2] + eps * iz;
                double ll;
                try
                {
                    ll = log_likelihood(p, m);
                }
                catch (const std::domain_error &)
                {
                    continue; // grid point sits exactly on an RX
                }
                if (ll > best.objective)
                {
                    best.objective = ll;
                    best.p = p;
                    best.ok = true;
                }
            }
    return best;
}

std::array<Position, 5> ellipse_seed_points(const RangeMeasurement &r, const MeasurementSet &geom)
{
    const Position &f1 = tx_of(geom, r);
    const Position &f2 = rx_of(geom, r.rx_index);
    const int dim = f1.dim();
    const Position center = 0.5 * (f1 + f2);
    const double c = 0.5 * distance(f1, f2);
    if (c == 0.0 && !(r.d_hat > 0.0))
        throw std::invalid_argument("ellipse_seed_points: coincident foci with zero range");

    Position axis = Position::zero(dim);
    if (c > 0.0)
        axis = (1.0 / (2.0 * c)) * (f2 - f1);
    else
        axis[0] = 1.0; // circle about the single focus: any axis works

    // perpendicular to the axis (in-plane for D = 3)
    Position perp = Position::zero(dim);
    if (dim == 2)
    {
        perp[0] = -axis[1];
        perp[1] = axis[0];
    }
    else
    {
        // pick the coordinate axis least aligned with `axis`
        int k = 0;
        for (int i = 1; i < 3; ++i)
            if (std::abs(axis[i]) < std::abs(axis[k]))
                k = i;
        Position e = Position::zero(3);
        e[k] = 1.0;
        perp = e - dot(e, axis) * axis;
        perp *= 1.0 / norm(perp);
    }

    const double a = 0.5 * r.d_hat;
    const double b2 = a * a - c * c;
    const double semi_major = (b2 >= 0.0) ? a : c; // infeasible range: collapse onto the segment
    const double semi_minor = (b2 >= 0.0) ? std::sqrt(b2) : 0.0;

    return {center,
            center + semi_major * axis,
            center - semi_major * axis,
            center + semi_minor * perp,
            center - semi_minor * perp};
}

PositionEstimate ml_gradient_ascent(const MeasurementSet &m, const GradientAscentConfig &cfg)
{
    validate(m);
    if (cfg.step_set.empty() || cfg.k_max < 1)
        throw std::invalid_argument("ml_gradient_ascent: need a step set and k_max >= 1");

    PositionEstimate best;
    best.method = "ml_gradient";
    best.objective = -std::numeric_limits<double>::infinity();

    for (const auto &r : m.ranges)
    {
        for (const Position &seed : ellipse_seed_points(r, m))
        {
            Position p = seed;
            double ll;
            try
            {
                ll = log_likelihood(p, m);
            }
            catch (const std::domain_error &)
            {
                continue; // seed on a node: skip this run
            }
            int k = 0;
            for (; k < cfg.k_max; ++k)
            {
                Position g = Position::zero(m.dim);
                try
                {
                    g = grad_log_likelihood(p, m);
                }
                catch (const std::domain_error &)
                {
                    break;
                }
                double best_step_ll = -std::numeric_limits<double>::infinity();
                double best_step = 0.0;
                for (double mu : cfg.step_set)
                {
                    const Position cand = p + mu * g;
                    double cll;
                    try
                    {
                        cll = log_likelihood(cand, m);
                    }
                    catch (const std::domain_error &)
                    {
                        continue;
                    }
                    if (cll > best_step_ll)
                    {
                        best_step_ll = cll;
                        best_step = mu;
                    }
                }
                if (!(best_step_ll > ll))
                    break; // no step improves the objective
                const Position next = p + best_step * g;
                const double moved = distance(next, p);
                p = next;
                ll = best_step_ll;
                if (moved <= cfg.eps_stop)
                {
                    ++k;
                    break;
                }
            }
            if (ll > best.objective)
            {
                best.objective = ll;
                best.p = p;
                best.iterations = k;
                best.ok = true;
            }
        }
    }
    return best;
}

PseudoLinearSystem build_pseudolinear(const MeasurementSet &m)
{
    validate(m);
    const int d = m.dim;
    const int n_rx = static_cast<int>(m.rx_positions.size());
    const int mr = static_cast<int>(m.ranges.size());
    const int ma = static_cast<int>(m.angles.size());
    const int cols = d + n_rx;
    const int rows = mr + d * ma;

    PseudoLinearSystem sys;
    sys.rows = rows;
    sys.cols = cols;
    sys.phi.assign(static_cast<std::size_t>(rows) * cols, 0.0);
    sys.rhs.assign(static_cast<std::size_t>(rows), 0.0);

    auto phi_at = [&](int r, int c) -> double & {
        return sys.phi[static_cast<std::size_t>(r) * cols + c];
    };

    for (int n = 0; n < mr; ++n)
    {
        const auto &r = m.ranges[static_cast<std::size_t>(n)];
        const Position &tx = tx_of(m, r);
        const Position &rx = rx_of(m, r.rx_index);
        const double b = r.d_hat * r.d_hat - distance(tx, rx) * distance(tx, rx) +
                         2.0 * dot(rx - tx, rx);
        if (b == 0.0)
            throw std::invalid_argument("build_pseudolinear: degenerate range row");
        for (int i = 0; i < d; ++i)
            phi_at(n, i) = 2.0 * (rx[i] - tx[i]) / b;
        phi_at(n, d + r.rx_index) = 2.0 * r.d_hat / b;
        sys.rhs[static_cast<std::size_t>(n)] = 1.0;
    }
    for (int j = 0; j < ma; ++j)
    {
        const auto &a = m.angles[static_cast<std::size_t>(j)];
        const Position &rx = rx_of(m, a.rx_index);
        for (int i = 0; i < d; ++i)
        {
            const int row = mr + d * j + i;
            phi_at(row, i) = 1.0;
            phi_at(row, d + a.rx_index) = -a.u_hat[i];
            sys.rhs[static_cast<std::size_t>(row)] = rx[i];
        }
    }
    return sys;
}

PositionEstimate irls_solve(const MeasurementSet &m, const IrlsConfig &cfg)
{
    if (cfg.iterations < 1 || !(cfg.eps_weight > 0.0))
        throw std::invalid_argument("irls_solve: need iterations >= 1 and eps_weight > 0");
    const PseudoLinearSystem sys = build_pseudolinear(m);
    const int rows = sys.rows, cols = sys.cols;
    const int d = m.dim;
    const int n_rx = static_cast<int>(m.rx_positions.size());

    PositionEstimate est;
    est.method = "irls";

    std::vector<double> w(static_cast<std::size_t>(rows), 1.0);
    std::vector<double> upsilon(static_cast<std::size_t>(cols), 0.0);

    for (int it = 0; it < cfg.iterations; ++it)
    {
        CMat wphi(rows, cols);
        for (int r = 0; r < rows; ++r)
        {
            const double sw = std::sqrt(w[static_cast<std::size_t>(r)]);
            for (int c = 0; c < cols; ++c)
                wphi(r, c) = sw * sys.phi[static_cast<std::size_t>(r) * cols + c];
        }
        int rank = 0;
        const CMat pinv = pseudo_inverse(wphi, &rank);
        if (rank < cols)
        {
            est.ok = false;
            return est; // unsolvable geometry
        }
        for (int c = 0; c < cols; ++c)
        {
            double acc = 0.0;
            for (int r = 0; r < rows; ++r)
                acc += pinv(c, r).real() * std::sqrt(w[static_cast<std::size_t>(r)]) *
                       sys.rhs[static_cast<std::size_t>(r)];
            upsilon[static_cast<std::size_t>(c)] = acc;
        }

        double resid_norm2 = 0.0;
        for (int r = 0; r < rows; ++r)
        {
            double acc = 0.0;
            for (int c = 0; c < cols; ++c)
                acc += sys.phi[static_cast<std::size_t>(r) * cols + c] *
                       upsilon[static_cast<std::size_t>(c)];
            const double e = std::abs(acc - sys.rhs[static_cast<std::size_t>(r)]);
            resid_norm2 += e * e;
            w[static_cast<std::size_t>(r)] = 1.0 / (e * e + cfg.eps_weight);
        }
        est.objective = std::sqrt(resid_norm2);
        est.iterations = it + 1;

        // keep eps_weight meaningful across datasets
        double wmax = 0.0;
        for (double x : w)
            wmax = std::max(wmax, x);
        if (wmax > 0.0)
            for (double &x : w)
                x /= wmax;
    }

    // second stage: project onto the cone where the auxiliary distances are
    // consistent with the position block
    CMat phi2(d + n_rx, d);
    for (int i = 0; i < d; ++i)
        phi2(i, i) = 1.0;
    for (int j = 0; j < n_rx; ++j)
        for (int i = 0; i < d; ++i)
            phi2(d + j, i) = 1.0;

    std::vector<double> rhs2(static_cast<std::size_t>(d + n_rx), 0.0);
    for (int i = 0; i < d; ++i)
        rhs2[static_cast<std::size_t>(i)] = upsilon[static_cast<std::size_t>(i)] *
                                            upsilon[static_cast<std::size_t>(i)];
    for (int j = 0; j < n_rx; ++j)
    {
        const Position &rx = m.rx_positions[static_cast<std::size_t>(j)];
        double dot_rx_p = 0.0;
        for (int i = 0; i < d; ++i)
            dot_rx_p += rx[i] * upsilon[static_cast<std::size_t>(i)];
        const double u_dj = upsilon[static_cast<std::size_t>(d + j)];
        rhs2[static_cast<std::size_t>(d + j)] = u_dj * u_dj + 2.0 * dot_rx_p - dot(rx, rx);
    }

    const CMat pinv2 = pseudo_inverse(phi2);
    Position p = Position::zero(d);
    for (int i = 0; i < d; ++i)
    {
        double acc = 0.0;
        for (int r = 0; r < d + n_rx; ++r)
            acc += pinv2(i, r).real() * rhs2[static_cast<std::size_t>(r)];
        const double sign = (upsilon[static_cast<std::size_t>(i)] < 0.0) ? -1.0 : 1.0;
        p[i] = sign * std::sqrt(std::max(acc, 0.0));
    }
    est.p = p;
    est.ok = true;
    return est;
}

} // namespace tagloc
