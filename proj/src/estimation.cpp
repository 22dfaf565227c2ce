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

#include "tagloc/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "spectrum_kernels.hpp"

namespace tagloc
{

GridSpec GridSpec::make(int n_subcarriers, int g_tau, int g_theta)
{
    if (n_subcarriers < 2 || g_tau < 1 || g_theta < 2 || (g_theta % 2) != 0)
        throw std::invalid_argument("GridSpec::make: invalid grid sizes");
    GridSpec g;
    g.n_subcarriers = n_subcarriers;
    g.tau.resize(static_cast<std::size_t>(g_tau));
    for (int i = 0; i < g_tau; ++i)
        g.tau[static_cast<std::size_t>(i)] = static_cast<double>(n_subcarriers) * i / g_tau;
    g.theta.resize(static_cast<std::size_t>(g_theta));
    g.sin_theta.resize(static_cast<std::size_t>(g_theta));
    for (int j = 0; j < g_theta; ++j)
    {
        const double s = 2.0 * (j - g_theta / 2) / g_theta;
        g.sin_theta[static_cast<std::size_t>(j)] = s;
        g.theta[static_cast<std::size_t>(j)] = std::asin(s);
    }
    return g;
}

double tdoa_to_range(double tau0_true, double tau_b_hat, double tau0_hat, double bandwidth_hz)
{
    if (bandwidth_hz <= 0.0)
        throw std::invalid_argument("tdoa_to_range: bandwidth must be positive");
    return kSpeedOfLight / bandwidth_hz * (tau0_true + tau_b_hat - tau0_hat);
}

std::vector<GridPeak> find_peaks_2d(const Spectrum2D &s, double t_min)
{
    std::vector<GridPeak> peaks;
    const int nr = static_cast<int>(s.tau_indices.size());
    const int nq = s.n_theta;
    for (int r = 0; r < nr; ++r)
        for (int q = 0; q < nq; ++q)
        {
            const double v = s.at(r, q);
            if (!(v > t_min))
                continue;
            if (r > 0 && !(s.at(r - 1, q) < v))
                continue;
            if (r + 1 < nr && !(v > s.at(r + 1, q)))
                continue;
            if (q > 0 && !(s.at(r, q - 1) < v))
                continue;
            if (q + 1 < nq && !(v > s.at(r, q + 1)))
                continue;
            peaks.push_back(GridPeak{r, q, v});
        }
    return peaks;
}

namespace
{

void normalize_max(std::vector<double> &v)
{
    double m = 0.0;
    for (double x : v)
        m = std::max(m, x);
    if (m > 0.0)
        for (double &x : v)
            x /= m;
}

detail::AngleTable steering_table(const ArrayGeometry &array, const GridSpec &grid)
{
    detail::AngleTable at;
    at.n_ant = array.size();
    at.g_theta = grid.g_theta();
    at.re.resize(static_cast<std::size_t>(at.n_ant) * at.g_theta);
    at.im.resize(static_cast<std::size_t>(at.n_ant) * at.g_theta);
    for (int q = 0; q < at.g_theta; ++q)
    {
        const auto a = steering_vector(array, Aoa{grid.theta[static_cast<std::size_t>(q)], 0.5 * kPi});
        for (int n = 0; n < at.n_ant; ++n)
        {
            // conjugated element response
            at.re[static_cast<std::size_t>(n) * at.g_theta + q] = a[static_cast<std::size_t>(n)].real();
            at.im[static_cast<std::size_t>(n) * at.g_theta + q] = -a[static_cast<std::size_t>(n)].imag();
        }
    }
    return at;
}

void check_stack(const CfrStack &stack, const EstimationSetup &setup, const char *where)
{
    if (stack.symbols.empty())
        throw std::invalid_argument(std::string(where) + ": empty stack");
    const CMat &h = stack.symbols.front();
    if (h.rows() != setup.grid.n_subcarriers)
        throw std::invalid_argument(std::string(where) + ": subcarrier count does not match grid");
    if (h.cols() != setup.array.size())
        throw std::invalid_argument(std::string(where) + ": antenna count does not match array");
    if (setup.grid.g_tau() < h.rows() || setup.grid.g_theta() < h.cols())
        throw std::invalid_argument(std::string(where) + ": grid finer than data required");
}

// Minimum-delay peak. Peaks are scanned row-major so ties resolve to the
// lowest (tau, theta) index pair.
std::optional<GridPeak> min_tau_peak(const std::vector<GridPeak> &peaks,
                                     const Spectrum2D &s, double tau_gt_row = -1.0,
                                     const std::vector<double> *tau_values = nullptr)
{
    std::optional<GridPeak> best;
    for (const GridPeak &p : peaks)
    {
        if (tau_values != nullptr)
        {
            const double tau = (*tau_values)[static_cast<std::size_t>(s.tau_indices[static_cast<std::size_t>(p.row)])];
            if (!(tau > tau_gt_row))
                continue;
        }
        if (!best || p.row < best->row)
            best = p;
    }
    return best;
}

// Among peaks on the given spectrum row, the azimuth with the largest value.
std::optional<int> best_theta_on_row(const std::vector<GridPeak> &peaks, int row)
{
    std::optional<int> q;
    double best = -1.0;
    for (const GridPeak &p : peaks)
        if (p.row == row && p.value > best)
        {
            best = p.value;
            q = p.q;
        }
    return q;
}

RangeAngleEstimate make_estimate(const char *method, double tau0_true, double tau0_hat,
                                 double tau_b_hat, double bandwidth_hz,
                                 std::optional<double> azimuth)
{
    if (!(tau_b_hat > tau0_hat))
        throw std::logic_error("estimate: backscatter delay must exceed the carrier delay");
    RangeAngleEstimate e;
    e.method = method;
    e.tau_carrier_hat = tau0_hat;
    e.tau_backscatter_hat = tau_b_hat;
    e.bistatic_range_m = tdoa_to_range(tau0_true, tau_b_hat, tau0_hat, bandwidth_hz);
    if (azimuth)
    {
        e.azimuth_rad = *azimuth;
        e.has_azimuth = true;
    }
    return e;
}

} // namespace

// ---------------------------------------------------------------------------
// 2-D FFT
// ---------------------------------------------------------------------------

Spectrum2D fft2d_spectrum(const CfrStack &stack, const EstimationSetup &setup)
{
    check_stack(stack, setup, "fft2d_spectrum");
    const GridSpec &grid = setup.grid;
    const int gt = grid.g_tau();
    const int gq = grid.g_theta();
    const int na = setup.array.size();
    const int ns = grid.n_subcarriers;

    const detail::AngleTable at = steering_table(setup.array, grid);

    Spectrum2D s;
    s.n_theta = gq;
    s.tau_indices.resize(static_cast<std::size_t>(gt));
    for (int i = 0; i < gt; ++i)
        s.tau_indices[static_cast<std::size_t>(i)] = i;
    s.values.assign(static_cast<std::size_t>(gt) * gq, 0.0);

    std::vector<cxd> rows(static_cast<std::size_t>(gt) * na);
    std::vector<cxd> tmp(static_cast<std::size_t>(gt));
    for (const CMat &h : stack.symbols)
    {
        for (int n = 0; n < na; ++n)
        {
            detail::delay_correlate(h.data() + n, ns, na, gt, tmp.data());
            for (int p = 0; p < gt; ++p)
                rows[static_cast<std::size_t>(p) * na + n] = tmp[p];
        }
        detail::combine_accumulate(rows.data(), gt, at, /*magnitude=*/true, s.values.data());
    }
    normalize_max(s.values);
    return s;
}

CarrierToa fft2d_carrier_toa(const CfrStack &h0, const EstimationSetup &setup, double t_min)
{
    const Spectrum2D s = fft2d_spectrum(h0, setup);
    const auto peaks = find_peaks_2d(s, t_min);
    const auto best = min_tau_peak(peaks, s);
    if (!best)
        return CarrierToa{std::nullopt, EstimatorError::no_peak};
    return CarrierToa{setup.grid.tau[static_cast<std::size_t>(best->row)], EstimatorError::none};
}

EstimateOutcome fft2d_backscatter(const CfrStack &hb, const EstimationSetup &setup,
                                  double tau0_true, double tau0_hat, double t_min)
{
    const Spectrum2D s = fft2d_spectrum(hb, setup);
    const auto peaks = find_peaks_2d(s, t_min);
    const auto best = min_tau_peak(peaks, s, tau0_hat, &setup.grid.tau);
    if (!best)
        return EstimateOutcome{std::nullopt, EstimatorError::no_peak};
    const double tau_b = setup.grid.tau[static_cast<std::size_t>(best->row)];
    const int q = *best_theta_on_row(peaks, best->row);
    return EstimateOutcome{make_estimate("fft2d", tau0_true, tau0_hat, tau_b, setup.bandwidth_hz,
                                         setup.grid.theta[static_cast<std::size_t>(q)]),
                           EstimatorError::none};
}

EstimateOutcome fft2d_estimate(const CfrStack &h0, const CfrStack &hb,
                               const EstimationSetup &setup, double tau0_true, double t_min)
{
    const CarrierToa c = fft2d_carrier_toa(h0, setup, t_min);
    if (!c.ok())
        return EstimateOutcome{std::nullopt, c.error};
    return fft2d_backscatter(hb, setup, tau0_true, *c.tau0_hat, t_min);
}

// ---------------------------------------------------------------------------
// 2-D MUSIC
// ---------------------------------------------------------------------------

Spectrum2D music2d_spectrum(const CfrStack &stack, const EstimationSetup &setup,
                            EstimatorError *err)
{
    check_stack(stack, setup, "music2d_spectrum");
    const int nsym = static_cast<int>(stack.symbols.size());
    if (nsym < 2)
        throw std::invalid_argument("music2d_spectrum: need at least two symbols");
    const GridSpec &grid = setup.grid;
    const int ns = grid.n_subcarriers;
    const int na = setup.array.size();
    const int m = ns * na;
    const int gt = grid.g_tau();
    const int gq = grid.g_theta();
    if (err)
        *err = EstimatorError::none;

    // sample covariance of the vectorized symbols (column-major stacking)
    CMat r(m, m);
    for (const CMat &h : stack.symbols)
    {
        std::vector<cxd> y(static_cast<std::size_t>(m));
        for (int n = 0; n < na; ++n)
            for (int mm = 0; mm < ns; ++mm)
                y[static_cast<std::size_t>(n) * ns + mm] = h(mm, n);
        for (int i = 0; i < m; ++i)
        {
            const cxd yi = y[static_cast<std::size_t>(i)];
            cxd *rrow = r.row(i);
            for (int j = 0; j < m; ++j)
                rrow[j] += yi * std::conj(y[static_cast<std::size_t>(j)]);
        }
    }
    {
        const double inv = 1.0 / nsym;
        cxd *d = r.data();
        for (std::size_t i = 0; i < static_cast<std::size_t>(m) * m; ++i)
            d[i] *= inv;
    }

    const EvdResult ev = hermitian_evd(r);
    const int k = mdl_order(ev.eigenvalues, nsym);
    const int n_noise = m - k;
    if (n_noise <= 0)
    {
        if (err)
            *err = EstimatorError::degenerate_subspace;
        return Spectrum2D{};
    }

    // Noise-subspace projection ||E_N^H u||^2 per grid point, evaluated per
    // noise eigenvector: delay-correlate its subcarrier columns over the tau
    // grid, then combine with the conjugated array response over the angle
    // grid. Eigenvectors are processed in batches to bound the working set.
    const detail::AngleTable at = steering_table(setup.array, grid);
    std::vector<double> den(static_cast<std::size_t>(gt) * gq, 0.0);
    const int batch = 32;
    const int tile = 256;
    thread_local std::vector<double> blk_re, blk_im;
    thread_local std::vector<cxd> gbuf;
    std::vector<cxd> col(static_cast<std::size_t>(ns));
    for (int r0 = 0; r0 < n_noise; r0 += batch)
    {
        const int r_count = std::min(batch, n_noise - r0);
        const int streams = r_count * na;
        gbuf.resize(static_cast<std::size_t>(streams) * gt);
        blk_re.resize(static_cast<std::size_t>(gt) * streams);
        blk_im.resize(static_cast<std::size_t>(gt) * streams);
        for (int rvec = 0; rvec < r_count; ++rvec)
        {
            const int colidx = k + r0 + rvec;
            for (int n = 0; n < na; ++n)
            {
                for (int mm = 0; mm < ns; ++mm)
                    col[static_cast<std::size_t>(mm)] = ev.eigenvectors(n * ns + mm, colidx);
                detail::delay_correlate(col.data(), ns, 1, gt,
                                        gbuf.data() + (static_cast<std::size_t>(rvec) * na + n) * gt);
            }
        }
        // tiled transpose keeps the tau-major block cache-resident
        for (int p0 = 0; p0 < gt; p0 += tile)
        {
            const int pend = std::min(p0 + tile, gt);
            for (int sidx = 0; sidx < streams; ++sidx)
            {
                const cxd *src = gbuf.data() + static_cast<std::size_t>(sidx) * gt;
                for (int p = p0; p < pend; ++p)
                {
                    blk_re[static_cast<std::size_t>(p) * streams + sidx] =
                        src[static_cast<std::size_t>(p)].real();
                    blk_im[static_cast<std::size_t>(p) * streams + sidx] =
                        src[static_cast<std::size_t>(p)].imag();
                }
            }
        }
        detail::batch_norm_accumulate(blk_re.data(), blk_im.data(), gt, r_count, at, den.data());
    }

    Spectrum2D s;
    s.n_theta = gq;
    s.tau_indices.resize(static_cast<std::size_t>(gt));
    for (int i = 0; i < gt; ++i)
        s.tau_indices[static_cast<std::size_t>(i)] = i;
    s.values.resize(den.size());
    const double floor_den = 1e-15 * m;
    for (std::size_t i = 0; i < den.size(); ++i)
        s.values[i] = 1.0 / std::max(den[i], floor_den);
    normalize_max(s.values);
    return s;
}

CarrierToa music2d_carrier_toa(const CfrStack &h0, const EstimationSetup &setup, double t_min)
{
    EstimatorError err;
    const Spectrum2D s = music2d_spectrum(h0, setup, &err);
    if (err != EstimatorError::none)
        return CarrierToa{std::nullopt, err};
    const auto peaks = find_peaks_2d(s, t_min);
    const auto best = min_tau_peak(peaks, s);
    if (!best)
        return CarrierToa{std::nullopt, EstimatorError::no_peak};
    return CarrierToa{setup.grid.tau[static_cast<std::size_t>(best->row)], EstimatorError::none};
}

EstimateOutcome music2d_backscatter(const CfrStack &hb, const EstimationSetup &setup,
                                    double tau0_true, double tau0_hat, double t_min)
{
    EstimatorError err;
    const Spectrum2D s = music2d_spectrum(hb, setup, &err);
    if (err != EstimatorError::none)
        return EstimateOutcome{std::nullopt, err};
    const auto peaks = find_peaks_2d(s, t_min);
    const auto best = min_tau_peak(peaks, s, tau0_hat, &setup.grid.tau);
    if (!best)
        return EstimateOutcome{std::nullopt, EstimatorError::no_peak};
    const double tau_b = setup.grid.tau[static_cast<std::size_t>(best->row)];
    const int q = *best_theta_on_row(peaks, best->row);
    return EstimateOutcome{make_estimate("music2d", tau0_true, tau0_hat, tau_b, setup.bandwidth_hz,
                                         setup.grid.theta[static_cast<std::size_t>(q)]),
                           EstimatorError::none};
}

EstimateOutcome music2d_estimate(const CfrStack &h0, const CfrStack &hb,
                                 const EstimationSetup &setup, double tau0_true, double t_min)
{
    const CarrierToa c = music2d_carrier_toa(h0, setup, t_min);
    if (!c.ok())
        return EstimateOutcome{std::nullopt, c.error};
    return music2d_backscatter(hb, setup, tau0_true, *c.tau0_hat, t_min);
}

// ---------------------------------------------------------------------------
// Delay-domain MUSIC (SRAE stage 1, JRAC step 1)
// ---------------------------------------------------------------------------

std::vector<double> delay_music_spectrum(const CfrStack &stack, const EstimationSetup &setup,
                                         EstimatorError *err)
{
    check_stack(stack, setup, "delay_music_spectrum");
    const GridSpec &grid = setup.grid;
    const int ns = grid.n_subcarriers;
    const int na = setup.array.size();
    const int nsym = static_cast<int>(stack.symbols.size());
    const int gt = grid.g_tau();
    if (err)
        *err = EstimatorError::none;

    // R = (1/Nsym) sum_k H[k] H[k]^H; every antenna column is a snapshot
    CMat r(ns, ns);
    for (const CMat &h : stack.symbols)
        for (int n = 0; n < na; ++n)
            for (int i = 0; i < ns; ++i)
            {
                const cxd hi = h(i, n);
                cxd *rrow = r.row(i);
                for (int j = 0; j < ns; ++j)
                    rrow[j] += hi * std::conj(h(j, n));
            }
    {
        const double inv = 1.0 / nsym;
        cxd *d = r.data();
        for (std::size_t i = 0; i < static_cast<std::size_t>(ns) * ns; ++i)
            d[i] *= inv;
    }

    const EvdResult ev = hermitian_evd(r);
    const int k = mdl_order(ev.eigenvalues, static_cast<long>(nsym) * na);
    const int n_noise = ns - k;
    if (n_noise <= 0)
    {
        if (err)
            *err = EstimatorError::degenerate_subspace;
        return {};
    }

    std::vector<double> den(static_cast<std::size_t>(gt), 0.0);
    std::vector<cxd> col(static_cast<std::size_t>(ns));
    std::vector<cxd> g(static_cast<std::size_t>(gt));
    for (int rvec = 0; rvec < n_noise; ++rvec)
    {
        for (int mm = 0; mm < ns; ++mm)
            col[static_cast<std::size_t>(mm)] = ev.eigenvectors(mm, k + rvec);
        detail::delay_correlate(col.data(), ns, 1, gt, g.data());
        for (int p = 0; p < gt; ++p)
            den[static_cast<std::size_t>(p)] += std::norm(g[static_cast<std::size_t>(p)]);
    }

    std::vector<double> s(static_cast<std::size_t>(gt));
    const double floor_den = 1e-15 * ns;
    for (int p = 0; p < gt; ++p)
        s[static_cast<std::size_t>(p)] = 1.0 / std::max(den[static_cast<std::size_t>(p)], floor_den);
    normalize_max(s);
    return s;
}

namespace
{

// First strict 1-D local maximum above t_min, optionally restricted to
// indices with tau > tau_floor. `at_least` switches the threshold test to >=.
std::optional<int> first_peak_1d(const std::vector<double> &s, double t_min,
                                 const std::vector<double> &tau, double tau_floor, bool at_least)
{
    const int n = static_cast<int>(s.size());
    for (int j = 0; j < n; ++j)
    {
        if (tau_floor >= 0.0 && !(tau[static_cast<std::size_t>(j)] > tau_floor))
            continue;
        const double v = s[static_cast<std::size_t>(j)];
        const bool above = at_least ? (v >= t_min) : (v > t_min);
        if (!above)
            continue;
        if (j > 0 && !(s[static_cast<std::size_t>(j - 1)] < v))
            continue;
        if (j + 1 < n && !(v > s[static_cast<std::size_t>(j + 1)]))
            continue;
        return j;
    }
    return std::nullopt;
}

} // namespace

CarrierToa srae_carrier_toa(const CfrStack &h0, const EstimationSetup &setup, double t_min)
{
    EstimatorError err;
    const std::vector<double> s = delay_music_spectrum(h0, setup, &err);
    if (err != EstimatorError::none)
        return CarrierToa{std::nullopt, err};
    const auto j = first_peak_1d(s, t_min, setup.grid.tau, -1.0, /*at_least=*/false);
    if (!j)
        return CarrierToa{std::nullopt, EstimatorError::no_peak};
    return CarrierToa{setup.grid.tau[static_cast<std::size_t>(*j)], EstimatorError::none};
}

EstimateOutcome srae_backscatter(const CfrStack &hb, const EstimationSetup &setup,
                                 double tau0_true, double tau0_hat, double t_min)
{
    EstimatorError err;
    const std::vector<double> s = delay_music_spectrum(hb, setup, &err);
    if (err != EstimatorError::none)
        return EstimateOutcome{std::nullopt, err};
    const auto j = first_peak_1d(s, t_min, setup.grid.tau, tau0_hat, /*at_least=*/false);
    if (!j)
        return EstimateOutcome{std::nullopt, EstimatorError::no_peak};
    const double tau_b = setup.grid.tau[static_cast<std::size_t>(*j)];

    // stage 2: taps of the selected delay across antennas, then spatial MUSIC
    const GridSpec &grid = setup.grid;
    const int ns = grid.n_subcarriers;
    const int na = setup.array.size();
    const int nsym = static_cast<int>(hb.symbols.size());

    std::vector<cxd> f(static_cast<std::size_t>(ns));
    for (int m = 0; m < ns; ++m)
    {
        const double phase = -2.0 * kPi * (m - ns / 2) * tau_b / ns;
        f[static_cast<std::size_t>(m)] = cxd(std::cos(phase), std::sin(phase));
    }

    // spatial covariance of the tap snapshots x[k] = f^dagger H[k]
    CMat rx(na, na);
    std::vector<cxd> x(static_cast<std::size_t>(na));
    for (const CMat &h : hb.symbols)
    {
        for (int n = 0; n < na; ++n)
        {
            cxd acc = 0.0;
            for (int m = 0; m < ns; ++m)
                acc += std::conj(f[static_cast<std::size_t>(m)]) * h(m, n);
            x[static_cast<std::size_t>(n)] = acc / static_cast<double>(ns);
        }
        for (int i = 0; i < na; ++i)
        {
            cxd *rrow = rx.row(i);
            const cxd xi = x[static_cast<std::size_t>(i)];
            for (int jj = 0; jj < na; ++jj)
                rrow[jj] += xi * std::conj(x[static_cast<std::size_t>(jj)]);
        }
    }
    {
        const double inv = 1.0 / nsym;
        cxd *d = rx.data();
        for (std::size_t i = 0; i < static_cast<std::size_t>(na) * na; ++i)
            d[i] *= inv;
    }

    const EvdResult ev = hermitian_evd(rx);
    const int k = 1; // a single extracted delay leaves a rank-1 signal space
    std::vector<double> spec(static_cast<std::size_t>(grid.g_theta()));
    const auto at = steering_table(setup.array, grid);
    const double floor_den = 1e-15 * na;
    for (int q = 0; q < grid.g_theta(); ++q)
    {
        double den = 0.0;
        for (int rvec = k; rvec < na; ++rvec)
        {
            double yre = 0.0, yim = 0.0;
            for (int n = 0; n < na; ++n)
            {
                const double ar = at.re[static_cast<std::size_t>(n) * at.g_theta + q];
                const double ai = at.im[static_cast<std::size_t>(n) * at.g_theta + q];
                const cxd e = ev.eigenvectors(n, rvec);
                // conj(a)^H applied to the eigenvector: accumulate a^H e
                yre += ar * e.real() - ai * e.imag();
                yim += ar * e.imag() + ai * e.real();
            }
            den += yre * yre + yim * yim;
        }
        spec[static_cast<std::size_t>(q)] = 1.0 / std::max(den, floor_den);
    }
    int qbest = 0;
    for (int q = 1; q < grid.g_theta(); ++q)
        if (spec[static_cast<std::size_t>(q)] > spec[static_cast<std::size_t>(qbest)])
            qbest = q;

    return EstimateOutcome{make_estimate("srae", tau0_true, tau0_hat, tau_b, setup.bandwidth_hz,
                                         grid.theta[static_cast<std::size_t>(qbest)]),
                           EstimatorError::none};
}

EstimateOutcome srae_estimate(const CfrStack &h0, const CfrStack &hb,
                              const EstimationSetup &setup, double tau0_true, double t_min)
{
    const CarrierToa c = srae_carrier_toa(h0, setup, t_min);
    if (!c.ok())
        return EstimateOutcome{std::nullopt, c.error};
    return srae_backscatter(hb, setup, tau0_true, *c.tau0_hat, t_min);
}

// ---------------------------------------------------------------------------
// JRAC
// ---------------------------------------------------------------------------

std::vector<std::pair<int, int>> cluster_1d(const std::vector<double> &aggregated)
{
    std::vector<std::pair<int, int>> runs;
    const int n = static_cast<int>(aggregated.size());
    int start = -1;
    for (int i = 0; i < n; ++i)
    {
        const bool nz = aggregated[static_cast<std::size_t>(i)] != 0.0;
        if (nz && start < 0)
            start = i;
        if (!nz && start >= 0)
        {
            runs.emplace_back(start, i - 1);
            start = -1;
        }
    }
    if (start >= 0)
        runs.emplace_back(start, n - 1);
    return runs;
}

namespace
{

struct JracCandidate
{
    double tau;
    double theta;
    double value;
    int row, q;
};

// Steps 1-4 on one channel: truncate the delay grid with the delay-domain
// MUSIC spectrum, build the heatmap on the surviving delays, clip, cluster
// per axis, and take the per-cluster maxima.
struct JracChannel
{
    EstimatorError error = EstimatorError::none;
    std::vector<JracCandidate> candidates;
};

JracChannel jrac_channel(const CfrStack &stack, const EstimationSetup &setup, double t_min,
                         double t_max)
{
    JracChannel out;
    EstimatorError err;
    const std::vector<double> s1 = delay_music_spectrum(stack, setup, &err);
    if (err != EstimatorError::none)
    {
        out.error = err;
        return out;
    }
    const GridSpec &grid = setup.grid;
    const int gt = grid.g_tau();
    const int gq = grid.g_theta();
    const int ns = grid.n_subcarriers;
    const int na = setup.array.size();

    std::vector<int> rows;
    for (int j = 0; j < gt; ++j)
        if (s1[static_cast<std::size_t>(j)] >= t_min)
            rows.push_back(j);
    if (rows.empty())
    {
        out.error = EstimatorError::no_peak;
        return out;
    }

    // heatmap over the truncated delay set
    const int nr = static_cast<int>(rows.size());
    Spectrum2D heat;
    heat.n_theta = gq;
    heat.tau_indices = rows;
    heat.values.assign(static_cast<std::size_t>(nr) * gq, 0.0);
    const auto at = steering_table(setup.array, grid);
    std::vector<cxd> fh(static_cast<std::size_t>(ns));
    std::vector<cxd> w(static_cast<std::size_t>(na));
    for (int ri = 0; ri < nr; ++ri)
    {
        const double tau = grid.tau[static_cast<std::size_t>(rows[static_cast<std::size_t>(ri)])];
        for (int m = 0; m < ns; ++m)
        {
            const double phase = 2.0 * kPi * (m - ns / 2) * tau / ns; // conj of the delay response
            fh[static_cast<std::size_t>(m)] = cxd(std::cos(phase), std::sin(phase));
        }
        double *hrow = heat.values.data() + static_cast<std::size_t>(ri) * gq;
        for (const CMat &h : stack.symbols)
        {
            for (int n = 0; n < na; ++n)
            {
                cxd acc = 0.0;
                for (int m = 0; m < ns; ++m)
                    acc += fh[static_cast<std::size_t>(m)] * h(m, n);
                w[static_cast<std::size_t>(n)] = acc;
            }
            for (int q = 0; q < gq; ++q)
            {
                double yre = 0.0, yim = 0.0;
                for (int n = 0; n < na; ++n)
                {
                    const double ar = at.re[static_cast<std::size_t>(n) * gq + q];
                    const double ai = at.im[static_cast<std::size_t>(n) * gq + q];
                    const double br = w[static_cast<std::size_t>(n)].real();
                    const double bi = w[static_cast<std::size_t>(n)].imag();
                    yre += ar * br - ai * bi;
                    yim += ar * bi + ai * br;
                }
                hrow[q] += yre * yre + yim * yim;
            }
        }
    }

    // clip below t_max * max
    double smax = 0.0;
    for (double v : heat.values)
        smax = std::max(smax, v);
    if (!(smax > 0.0))
    {
        out.error = EstimatorError::no_peak;
        return out;
    }
    const double clip = t_max * smax;
    for (double &v : heat.values)
        if (v < clip)
            v = 0.0;

    // aggregate per axis and cluster
    std::vector<double> agg_tau(static_cast<std::size_t>(nr), 0.0);
    std::vector<double> agg_theta(static_cast<std::size_t>(gq), 0.0);
    for (int ri = 0; ri < nr; ++ri)
        for (int q = 0; q < gq; ++q)
        {
            const double v = heat.at(ri, q);
            agg_tau[static_cast<std::size_t>(ri)] += v;
            agg_theta[static_cast<std::size_t>(q)] += v;
        }
    const auto dclusters = cluster_1d(agg_tau);
    const auto aclusters = cluster_1d(agg_theta);
    if (dclusters.empty() || aclusters.empty())
    {
        out.error = EstimatorError::no_peak;
        return out;
    }

    for (const auto &dc : dclusters)
        for (const auto &ac : aclusters)
        {
            double best = 0.0;
            int bri = -1, bq = -1;
            for (int ri = dc.first; ri <= dc.second; ++ri)
                for (int q = ac.first; q <= ac.second; ++q)
                {
                    const double v = heat.at(ri, q);
                    if (v > best)
                    {
                        best = v;
                        bri = ri;
                        bq = q;
                    }
                }
            if (bri < 0)
                continue; // cross pair with an entirely clipped intersection
            JracCandidate c;
            c.row = rows[static_cast<std::size_t>(bri)];
            c.q = bq;
            c.tau = grid.tau[static_cast<std::size_t>(c.row)];
            c.theta = grid.theta[static_cast<std::size_t>(bq)];
            c.value = best;
            out.candidates.push_back(c);
        }
    if (out.candidates.empty())
        out.error = EstimatorError::no_peak;
    return out;
}

// Minimum-delay cluster candidate; ties on the delay (e.g. a wrapped array
// response lobe sharing the same delay row) go to the stronger peak.
std::optional<JracCandidate> min_tau_candidate(const std::vector<JracCandidate> &cands,
                                               double tau_floor)
{
    std::optional<JracCandidate> best;
    for (const auto &c : cands)
    {
        if (tau_floor >= 0.0 && !(c.tau > tau_floor))
            continue;
        if (!best || c.tau < best->tau ||
            (c.tau == best->tau &&
             (c.value > best->value || (c.value == best->value && c.q < best->q))))
            best = c;
    }
    return best;
}

} // namespace

CarrierToa jrac_carrier_toa(const CfrStack &h0, const EstimationSetup &setup, double t_min,
                            double t_max)
{
    const JracChannel ch = jrac_channel(h0, setup, t_min, t_max);
    if (ch.error != EstimatorError::none)
        return CarrierToa{std::nullopt, ch.error};
    const auto best = min_tau_candidate(ch.candidates, -1.0);
    if (!best)
        return CarrierToa{std::nullopt, EstimatorError::no_peak};
    return CarrierToa{best->tau, EstimatorError::none};
}

EstimateOutcome jrac_backscatter(const CfrStack &hb, const EstimationSetup &setup,
                                 double tau0_true, double tau0_hat, double t_min, double t_max)
{
    const JracChannel ch = jrac_channel(hb, setup, t_min, t_max);
    if (ch.error != EstimatorError::none)
        return EstimateOutcome{std::nullopt, ch.error};
    const auto best = min_tau_candidate(ch.candidates, tau0_hat);
    if (!best)
        return EstimateOutcome{std::nullopt, EstimatorError::no_peak};
    return EstimateOutcome{make_estimate("jrac", tau0_true, tau0_hat, best->tau,
                                         setup.bandwidth_hz, best->theta),
                           EstimatorError::none};
}

EstimateOutcome jrac_estimate(const CfrStack &h0, const CfrStack &hb,
                              const EstimationSetup &setup, double tau0_true, double t_min,
                              double t_max)
{
    if (!(t_min > 0.0) || !(t_max > 0.0) || !(t_max < 1.0))
        throw std::invalid_argument("jrac_estimate: thresholds must satisfy 0 < t_min, 0 < t_max < 1");
    const CarrierToa c = jrac_carrier_toa(h0, setup, t_min, t_max);
    if (!c.ok())
        return EstimateOutcome{std::nullopt, c.error};
    return jrac_backscatter(hb, setup, tau0_true, *c.tau0_hat, t_min, t_max);
}

// ---------------------------------------------------------------------------
// Range-only first-peak baseline
// ---------------------------------------------------------------------------

namespace
{

std::vector<double> antenna0_delay_profile(const CfrStack &stack, const EstimationSetup &setup)
{
    check_stack(stack, setup, "cir_first_peak");
    const int ns = setup.grid.n_subcarriers;
    const int na = setup.array.size();
    const int gt = setup.grid.g_tau();
    std::vector<double> s(static_cast<std::size_t>(gt), 0.0);
    std::vector<cxd> g(static_cast<std::size_t>(gt));
    for (const CMat &h : stack.symbols)
    {
        detail::delay_correlate(h.data(), ns, na, gt, g.data());
        for (int p = 0; p < gt; ++p)
            s[static_cast<std::size_t>(p)] += std::abs(g[static_cast<std::size_t>(p)]);
    }
    normalize_max(s);
    return s;
}

} // namespace

CarrierToa cir_carrier_toa(const CfrStack &h0, const EstimationSetup &setup, double t_min)
{
    const std::vector<double> s = antenna0_delay_profile(h0, setup);
    const auto j = first_peak_1d(s, t_min, setup.grid.tau, -1.0, /*at_least=*/true);
    if (!j)
        return CarrierToa{std::nullopt, EstimatorError::no_peak};
    return CarrierToa{setup.grid.tau[static_cast<std::size_t>(*j)], EstimatorError::none};
}

EstimateOutcome cir_backscatter(const CfrStack &hb, const EstimationSetup &setup,
                                double tau0_true, double tau0_hat, double t_min)
{
    const std::vector<double> s = antenna0_delay_profile(hb, setup);
    const auto j = first_peak_1d(s, t_min, setup.grid.tau, tau0_hat, /*at_least=*/true);
    if (!j)
        return EstimateOutcome{std::nullopt, EstimatorError::no_peak};
    return EstimateOutcome{make_estimate("cir", tau0_true, tau0_hat,
                                         setup.grid.tau[static_cast<std::size_t>(*j)],
                                         setup.bandwidth_hz, std::nullopt),
                           EstimatorError::none};
}

EstimateOutcome cir_first_peak_range(const CfrStack &h0, const CfrStack &hb,
                                     const EstimationSetup &setup, double tau0_true, double t_min)
{
    const CarrierToa c = cir_carrier_toa(h0, setup, t_min);
    if (!c.ok())
        return EstimateOutcome{std::nullopt, c.error};
    return cir_backscatter(hb, setup, tau0_true, *c.tau0_hat, t_min);
}

} // namespace tagloc
