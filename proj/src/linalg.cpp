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

#include "tagloc/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include <fftw3.h>

#include "tagloc/geometry.hpp"
#include "spectrum_kernels.hpp"

namespace tagloc
{

CMat CMat::identity(int n)
{
    CMat m(n, n);
    for (int i = 0; i < n; ++i)
        m(i, i) = 1.0;
    return m;
}

CMat CMat::conjugate_transpose() const
{
    CMat r(cols_, rows_);
    for (int i = 0; i < rows_; ++i)
        for (int j = 0; j < cols_; ++j)
            r(j, i) = std::conj((*this)(i, j));
    return r;
}

double CMat::frobenius_norm() const
{
    double s = 0.0;
    for (const cxd &v : d_)
        s += std::norm(v);
    return std::sqrt(s);
}

CMat matmul(const CMat &a, const CMat &b)
{
    if (a.cols() != b.rows())
        throw std::invalid_argument("matmul: inner dimensions differ");
    CMat r(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i)
    {
        const cxd *arow = a.row(i);
        cxd *rrow = r.row(i);
        for (int k = 0; k < a.cols(); ++k)
        {
            const cxd aik = arow[k];
            if (aik == cxd(0.0, 0.0))
                continue;
            const cxd *brow = b.row(k);
            for (int j = 0; j < b.cols(); ++j)
                rrow[j] += aik * brow[j];
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// Hermitian eigendecomposition
// ---------------------------------------------------------------------------

namespace
{

double pythag(double a, double b)
{
    const double aa = std::abs(a), ab = std::abs(b);
    const double p = std::max(aa, ab);
    if (p == 0.0)
        return 0.0;
    const double q = std::min(aa, ab) / p;
    return p * std::sqrt(1.0 + q * q);
}

// Reduce the Hermitian matrix a (destroyed) to a real tridiagonal form,
// accumulating the unitary similarity in q. On return d holds the diagonal
// and e the (real, non-negative) subdiagonal, with the complex subdiagonal
// phases folded into q's columns. Internally works on split re/im planes so
// the rank-2 updates vectorize.
void tridiagonalize(CMat &a, CMat &q, std::vector<double> &d, std::vector<double> &e)
{
    const int n = a.rows();
    const std::size_t nn = static_cast<std::size_t>(n) * n;
    d.assign(n, 0.0);
    e.assign(n, 0.0);

    std::vector<double> are(nn), aim(nn), qre(nn), qim(nn);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
        {
            const cxd val = a(i, j);
            are[static_cast<std::size_t>(i) * n + j] = val.real();
            aim[static_cast<std::size_t>(i) * n + j] = val.imag();
            qre[static_cast<std::size_t>(i) * n + j] = (i == j) ? 1.0 : 0.0;
            qim[static_cast<std::size_t>(i) * n + j] = 0.0;
        }

    std::vector<double> vre(n), vim(n), pre(n), pim(n), wre(n), wim(n);

    for (int k = 0; k + 2 < n; ++k)
    {
        const int m = n - k - 1; // trailing column size below the diagonal
        const int off = k + 1;
        double sigma2 = 0.0;
        for (int i = 0; i < m; ++i)
        {
            const std::size_t idx = static_cast<std::size_t>(off + i) * n + k;
            sigma2 += are[idx] * are[idx] + aim[idx] * aim[idx];
        }
        const double sigma = std::sqrt(sigma2);
        const std::size_t a10 = static_cast<std::size_t>(off) * n + k;
        if (sigma == 0.0)
        {
            are[a10] = 0.0;
            aim[a10] = 0.0;
            continue;
        }
        const double ar = are[a10], ai = aim[a10];
        const double aabs = std::sqrt(ar * ar + ai * ai);
        const double phr = (aabs > 0.0) ? ar / aabs : 1.0;
        const double phi = (aabs > 0.0) ? ai / aabs : 0.0;

        for (int i = 0; i < m; ++i)
        {
            const std::size_t idx = static_cast<std::size_t>(off + i) * n + k;
            vre[i] = are[idx];
            vim[i] = aim[idx];
        }
        vre[0] += phr * sigma;
        vim[0] += phi * sigma;
        const double tau = 2.0 / (2.0 * (sigma2 + sigma * aabs));

        // p = tau * A22 * v
        for (int i = 0; i < m; ++i)
        {
            const double *arow_r = are.data() + static_cast<std::size_t>(off + i) * n + off;
            const double *arow_i = aim.data() + static_cast<std::size_t>(off + i) * n + off;
            double sr = 0.0, si = 0.0;
            for (int j = 0; j < m; ++j)
            {
                sr += arow_r[j] * vre[j] - arow_i[j] * vim[j];
                si += arow_r[j] * vim[j] + arow_i[j] * vre[j];
            }
            pre[i] = tau * sr;
            pim[i] = tau * si;
        }
        double vhp_r = 0.0, vhp_i = 0.0;
        for (int i = 0; i < m; ++i)
        {
            vhp_r += vre[i] * pre[i] + vim[i] * pim[i];
            vhp_i += vre[i] * pim[i] - vim[i] * pre[i];
        }
        const double kr = 0.5 * tau * vhp_r, ki = 0.5 * tau * vhp_i;
        for (int i = 0; i < m; ++i)
        {
            wre[i] = pre[i] - (kr * vre[i] - ki * vim[i]);
            wim[i] = pim[i] - (kr * vim[i] + ki * vre[i]);
        }

        // A22 <- A22 - v w^H - w v^H
        for (int i = 0; i < m; ++i)
        {
            double *arow_r = are.data() + static_cast<std::size_t>(off + i) * n + off;
            double *arow_i = aim.data() + static_cast<std::size_t>(off + i) * n + off;
            const double vr = vre[i], vi = vim[i], wr = wre[i], wi = wim[i];
            for (int j = 0; j < m; ++j)
            {
                // v_i conj(w_j) + w_i conj(v_j)
                arow_r[j] -= vr * wre[j] + vi * wim[j] + wr * vre[j] + wi * vim[j];
                arow_i[j] -= vi * wre[j] - vr * wim[j] + wi * vre[j] - wr * vim[j];
            }
        }

        are[a10] = -phr * sigma;
        aim[a10] = -phi * sigma;
        for (int i = 1; i < m; ++i)
        {
            const std::size_t idx = static_cast<std::size_t>(off + i) * n + k;
            are[idx] = 0.0;
            aim[idx] = 0.0;
        }

        // Q <- Q * (I - tau v v^H), restricted to columns k+1..n-1
        for (int r = 0; r < n; ++r)
        {
            double *qrow_r = qre.data() + static_cast<std::size_t>(r) * n + off;
            double *qrow_i = qim.data() + static_cast<std::size_t>(r) * n + off;
            double sr = 0.0, si = 0.0;
            for (int j = 0; j < m; ++j)
            {
                sr += qrow_r[j] * vre[j] - qrow_i[j] * vim[j];
                si += qrow_r[j] * vim[j] + qrow_i[j] * vre[j];
            }
            sr *= tau;
            si *= tau;
            for (int j = 0; j < m; ++j)
            {
                // s * conj(v_j)
                qrow_r[j] -= sr * vre[j] + si * vim[j];
                qrow_i[j] -= si * vre[j] - sr * vim[j];
            }
        }
    }

    for (int i = 0; i < n; ++i)
        d[i] = are[static_cast<std::size_t>(i) * n + i];

    // make the subdiagonal real by a diagonal phase similarity
    double cr = 1.0, ci = 0.0;
    std::vector<double> phase_r(n, 1.0), phase_i(n, 0.0);
    for (int k = 0; k + 1 < n; ++k)
    {
        const std::size_t idx = static_cast<std::size_t>(k + 1) * n + k;
        const double er = are[idx], ei = aim[idx];
        const double mag = std::sqrt(er * er + ei * ei);
        e[k] = mag;
        if (mag > 0.0)
        {
            const double nr = (cr * er - ci * ei) / mag;
            const double ni = (cr * ei + ci * er) / mag;
            cr = nr;
            ci = ni;
        }
        phase_r[k + 1] = cr;
        phase_i[k + 1] = ci;
    }
    for (int r = 0; r < n; ++r)
        for (int k = 0; k < n; ++k)
        {
            const std::size_t idx = static_cast<std::size_t>(r) * n + k;
            const double xr = qre[idx], xi = qim[idx];
            q(r, k) = cxd(xr * phase_r[k] - xi * phase_i[k], xr * phase_i[k] + xi * phase_r[k]);
        }
}

// Implicit-shift QL sweeps on the real tridiagonal (d, e), rotating the rows
// of the eigenvector planes along (eigenvectors stored as rows, re/im split
// so the rotations vectorize). EISPACK tql2 lineage.
void tql_implicit(std::vector<double> &d, std::vector<double> &e, std::vector<double> &zre,
                  std::vector<double> &zim, int n)
{
    const double eps = std::numeric_limits<double>::epsilon();
    if (n < 2)
        return;
    e[n - 1] = 0.0;
    // global deflation scale; a neighbor-local test never converges inside
    // numerically-zero blocks of rank-deficient matrices
    double tst1 = 0.0;
    for (int l = 0; l < n; ++l)
        tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    for (int l = 0; l < n; ++l)
    {
        int iter = 0;
        int m;
        do
        {
            for (m = l; m < n - 1; ++m)
            {
                const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= eps * std::max(dd, tst1))
                    break;
            }
            if (m != l)
            {
                if (iter++ == 60)
                    throw std::runtime_error("hermitian_evd: QL iteration failed to converge");
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = pythag(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
                double s = 1.0, c = 1.0, p = 0.0;
                for (int i = m - 1; i >= l; --i)
                {
                    double f = s * e[i];
                    const double b = c * e[i];
                    r = pythag(f, g);
                    e[i + 1] = r;
                    if (r == 0.0)
                    {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;

                    double *zri = zre.data() + static_cast<std::size_t>(i) * n;
                    double *zri1 = zre.data() + static_cast<std::size_t>(i + 1) * n;
                    double *zii = zim.data() + static_cast<std::size_t>(i) * n;
                    double *zii1 = zim.data() + static_cast<std::size_t>(i + 1) * n;
                    for (int k = 0; k < n; ++k)
                    {
                        const double fr = zri1[k], fi = zii1[k];
                        zri1[k] = s * zri[k] + c * fr;
                        zii1[k] = s * zii[k] + c * fi;
                        zri[k] = c * zri[k] - s * fr;
                        zii[k] = c * zii[k] - s * fi;
                    }
                }
                if (r == 0.0 && m - 1 >= l)
                    continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }
}

} // namespace

EvdResult hermitian_evd(const CMat &a)
{
    if (a.rows() != a.cols() || a.empty())
        throw std::invalid_argument("hermitian_evd: matrix must be square and non-empty");
    const int n = a.rows();
    const double fnorm = a.frobenius_norm();
    double herm_err = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j)
            herm_err = std::max(herm_err, std::abs(a(i, j) - std::conj(a(j, i))));
    if (herm_err > 1e-10 * std::max(fnorm, 1e-300))
        throw std::invalid_argument("hermitian_evd: matrix is not Hermitian");

    // symmetrized working copy
    CMat work(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            work(i, j) = 0.5 * (a(i, j) + std::conj(a(j, i)));

    CMat q = CMat::identity(n);
    std::vector<double> d, e;
    tridiagonalize(work, q, d, e);

    // eigenvectors as rows while rotating (contiguous row updates)
    std::vector<double> zre(static_cast<std::size_t>(n) * n), zim(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k)
        {
            const cxd v = q(k, i);
            zre[static_cast<std::size_t>(i) * n + k] = v.real();
            zim[static_cast<std::size_t>(i) * n + k] = v.imag();
        }

    tql_implicit(d, e, zre, zim, n);

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int i, int j) { return d[i] > d[j]; });

    EvdResult res;
    res.eigenvalues.resize(n);
    res.eigenvectors = CMat(n, n);
    for (int j = 0; j < n; ++j)
    {
        const int src = order[j];
        res.eigenvalues[j] = d[src];
        const std::size_t base = static_cast<std::size_t>(src) * n;
        for (int r = 0; r < n; ++r)
            res.eigenvectors(r, j) = cxd(zre[base + r], zim[base + r]);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Pseudo-inverse
// ---------------------------------------------------------------------------

CMat pseudo_inverse(const CMat &a, int *rank_out)
{
    if (a.empty())
        throw std::invalid_argument("pseudo_inverse: empty matrix");
    const int m = a.rows(), n = a.cols();
    const CMat ah = a.conjugate_transpose();
    const bool gram_right = (m >= n); // eigendecompose the smaller Gram matrix

    const CMat gram = gram_right ? matmul(ah, a) : matmul(a, ah);
    EvdResult ev = hermitian_evd(gram);
    const int g = gram.rows();

    const double lam_max = std::max(ev.eigenvalues.empty() ? 0.0 : ev.eigenvalues[0], 0.0);
    const double sv_max = std::sqrt(lam_max);
    const double sv_tol = 1e-12 * sv_max;

    int rank = 0;
    CMat proj(g, g); // sum over retained v_i v_i^H / lambda_i
    for (int i = 0; i < g; ++i)
    {
        const double lam = ev.eigenvalues[i];
        if (lam <= 0.0 || std::sqrt(lam) <= sv_tol)
            continue;
        ++rank;
        const double inv = 1.0 / lam;
        for (int r = 0; r < g; ++r)
        {
            const cxd vr = ev.eigenvectors(r, i) * inv;
            cxd *prow = proj.row(r);
            for (int c = 0; c < g; ++c)
                prow[c] += vr * std::conj(ev.eigenvectors(c, i));
        }
    }
    if (rank_out)
        *rank_out = rank;
    return gram_right ? matmul(proj, ah) : matmul(ah, proj);
}

// ---------------------------------------------------------------------------
// MDL order selection
// ---------------------------------------------------------------------------

int mdl_order(const std::vector<double> &eigenvalues_desc, long n_snapshots)
{
    const int m = static_cast<int>(eigenvalues_desc.size());
    if (m == 0)
        throw std::invalid_argument("mdl_order: empty eigenvalue list");
    if (n_snapshots < 1)
        throw std::invalid_argument("mdl_order: need at least one snapshot");
    if (m == 1)
        return 1;
    const double lam_max = eigenvalues_desc[0];
    if (!(lam_max > 0.0))
        return 1;

    // With fewer snapshots than dimensions the sample covariance carries
    // m - n structural zeros that say nothing about the model order; score
    // only the leading min(m, n) eigenvalues.
    const int m_eff = std::min<long>(m, n_snapshots);

    // floor tiny/negative eigenvalues so log stays finite
    const double floor_val = lam_max * 1e-15;
    std::vector<double> lam(static_cast<std::size_t>(m_eff));
    for (int i = 0; i < m_eff; ++i)
        lam[static_cast<std::size_t>(i)] = std::max(eigenvalues_desc[static_cast<std::size_t>(i)], floor_val);

    std::vector<double> suf_sum(static_cast<std::size_t>(m_eff) + 1, 0.0);
    std::vector<double> suf_logsum(static_cast<std::size_t>(m_eff) + 1, 0.0);
    for (int i = m_eff - 1; i >= 0; --i)
    {
        suf_sum[static_cast<std::size_t>(i)] = suf_sum[static_cast<std::size_t>(i) + 1] + lam[static_cast<std::size_t>(i)];
        suf_logsum[static_cast<std::size_t>(i)] =
            suf_logsum[static_cast<std::size_t>(i) + 1] + std::log(lam[static_cast<std::size_t>(i)]);
    }

    const double logn = std::log(static_cast<double>(n_snapshots));
    int best_k = 0;
    double best_score = std::numeric_limits<double>::infinity();
    for (int k = 0; k < m_eff; ++k)
    {
        const int tail = m_eff - k;
        const double mean_log = suf_logsum[static_cast<std::size_t>(k)] / tail;
        const double log_mean = std::log(suf_sum[static_cast<std::size_t>(k)] / tail);
        const double score = -static_cast<double>(tail) * n_snapshots * (mean_log - log_mean) +
                             0.5 * k * (2.0 * m_eff - k) * logn;
        if (score < best_score)
        {
            best_score = score;
            best_k = k;
        }
    }
    return std::clamp(best_k, 1, m - 1);
}

// ---------------------------------------------------------------------------
// Oversampled 2-D spectrum and shared kernels
// ---------------------------------------------------------------------------

namespace detail
{

bool is_pow2(int n)
{
    return n > 0 && (n & (n - 1)) == 0;
}

namespace
{

// FFTW plan cache for 1-D complex transforms with sign +1 (exp(+j 2 pi ...)).
// Plans are created FFTW_UNALIGNED so they run on any buffer.
class PlanCache
{
  public:
    static fftw_plan get(int n)
    {
        static PlanCache cache;
        std::lock_guard<std::mutex> lock(cache.mutex_);
        auto it = cache.plans_.find(n);
        if (it != cache.plans_.end())
            return it->second;
        std::vector<cxd> in(n), out(n);
        fftw_plan p = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex *>(in.data()),
                                       reinterpret_cast<fftw_complex *>(out.data()), FFTW_BACKWARD,
                                       FFTW_ESTIMATE | FFTW_UNALIGNED);
        cache.plans_.emplace(n, p);
        return p;
    }

  private:
    PlanCache() = default;
    std::mutex mutex_;
    std::unordered_map<int, fftw_plan> plans_;
};

} // namespace

void delay_correlate(const cxd *x, int n_sub, int stride, int g_tau, cxd *out)
{
    const int half = n_sub / 2;
    if (is_pow2(g_tau))
    {
        std::vector<cxd> buf(g_tau, cxd(0.0, 0.0));
        for (int m = 0; m < n_sub; ++m)
        {
            int bin = m - half;
            if (bin < 0)
                bin += g_tau;
            buf[bin] = x[static_cast<std::size_t>(m) * stride];
        }
        fftw_plan plan = PlanCache::get(g_tau);
        fftw_execute_dft(plan, reinterpret_cast<fftw_complex *>(buf.data()),
                         reinterpret_cast<fftw_complex *>(out));
        return;
    }
    // direct fallback
    const double w0 = 2.0 * kPi / g_tau;
    for (int p = 0; p < g_tau; ++p)
    {
        cxd s = 0.0;
        for (int m = 0; m < n_sub; ++m)
        {
            const double phase = w0 * (m - half) * p;
            s += x[static_cast<std::size_t>(m) * stride] * cxd(std::cos(phase), std::sin(phase));
        }
        out[p] = s;
    }
}

AngleTable make_angle_table_from_sines(const std::vector<double> &sines, int n_ant)
{
    AngleTable at;
    at.n_ant = n_ant;
    at.g_theta = static_cast<int>(sines.size());
    at.re.resize(static_cast<std::size_t>(n_ant) * at.g_theta);
    at.im.resize(static_cast<std::size_t>(n_ant) * at.g_theta);
    for (int n = 0; n < n_ant; ++n)
        for (int q = 0; q < at.g_theta; ++q)
        {
            const double phase = -kPi * n * sines[q]; // conj of the element response
            at.re[static_cast<std::size_t>(n) * at.g_theta + q] = std::cos(phase);
            at.im[static_cast<std::size_t>(n) * at.g_theta + q] = std::sin(phase);
        }
    return at;
}

void combine_accumulate(const cxd *__restrict rows, int g_tau, const AngleTable &at,
                        bool magnitude, double *__restrict acc)
{
    const int gq = at.g_theta;
    const int na = at.n_ant;
    if (na == 4)
    {
        const double *__restrict a0r = at.re.data();
        const double *__restrict a1r = a0r + gq;
        const double *__restrict a2r = a1r + gq;
        const double *__restrict a3r = a2r + gq;
        const double *__restrict a0i = at.im.data();
        const double *__restrict a1i = a0i + gq;
        const double *__restrict a2i = a1i + gq;
        const double *__restrict a3i = a2i + gq;
        for (int p = 0; p < g_tau; ++p)
        {
            const cxd *row = rows + static_cast<std::size_t>(p) * 4;
            const double b0r = row[0].real(), b0i = row[0].imag();
            const double b1r = row[1].real(), b1i = row[1].imag();
            const double b2r = row[2].real(), b2i = row[2].imag();
            const double b3r = row[3].real(), b3i = row[3].imag();
            double *arow = acc + static_cast<std::size_t>(p) * gq;
            if (magnitude)
            {
                for (int q = 0; q < gq; ++q)
                {
                    const double yre = a0r[q] * b0r - a0i[q] * b0i + a1r[q] * b1r - a1i[q] * b1i +
                                       a2r[q] * b2r - a2i[q] * b2i + a3r[q] * b3r - a3i[q] * b3i;
                    const double yim = a0r[q] * b0i + a0i[q] * b0r + a1r[q] * b1i + a1i[q] * b1r +
                                       a2r[q] * b2i + a2i[q] * b2r + a3r[q] * b3i + a3i[q] * b3r;
                    arow[q] += std::sqrt(yre * yre + yim * yim);
                }
            }
            else
            {
                for (int q = 0; q < gq; ++q)
                {
                    const double yre = a0r[q] * b0r - a0i[q] * b0i + a1r[q] * b1r - a1i[q] * b1i +
                                       a2r[q] * b2r - a2i[q] * b2i + a3r[q] * b3r - a3i[q] * b3i;
                    const double yim = a0r[q] * b0i + a0i[q] * b0r + a1r[q] * b1i + a1i[q] * b1r +
                                       a2r[q] * b2i + a2i[q] * b2r + a3r[q] * b3i + a3i[q] * b3r;
                    arow[q] += yre * yre + yim * yim;
                }
            }
        }
        return;
    }
    for (int p = 0; p < g_tau; ++p)
    {
        const cxd *row = rows + static_cast<std::size_t>(p) * na;
        double *arow = acc + static_cast<std::size_t>(p) * gq;
        for (int q = 0; q < gq; ++q)
        {
            double yre = 0.0, yim = 0.0;
            for (int n = 0; n < na; ++n)
            {
                const double ar = at.re[static_cast<std::size_t>(n) * gq + q];
                const double ai = at.im[static_cast<std::size_t>(n) * gq + q];
                const double br = row[n].real(), bi = row[n].imag();
                yre += ar * br - ai * bi;
                yim += ar * bi + ai * br;
            }
            const double p2 = yre * yre + yim * yim;
            arow[q] += magnitude ? std::sqrt(p2) : p2;
        }
    }
}

void batch_norm_accumulate(const double *__restrict blk_re, const double *__restrict blk_im,
                           int g_tau, int r_count, const AngleTable &at,
                           double *__restrict acc)
{
    const int gq = at.g_theta;
    const int na = at.n_ant;
    std::vector<double> tmp(static_cast<std::size_t>(gq));
    if (na == 4)
    {
        const double *__restrict a0r = at.re.data();
        const double *__restrict a1r = a0r + gq;
        const double *__restrict a2r = a1r + gq;
        const double *__restrict a3r = a2r + gq;
        const double *__restrict a0i = at.im.data();
        const double *__restrict a1i = a0i + gq;
        const double *__restrict a2i = a1i + gq;
        const double *__restrict a3i = a2i + gq;
        for (int p = 0; p < g_tau; ++p)
        {
            const double *bre = blk_re + static_cast<std::size_t>(p) * r_count * 4;
            const double *bim = blk_im + static_cast<std::size_t>(p) * r_count * 4;
            std::fill(tmp.begin(), tmp.end(), 0.0);
            for (int r = 0; r < r_count; ++r)
            {
                const double b0r = bre[r * 4 + 0], b1r = bre[r * 4 + 1];
                const double b2r = bre[r * 4 + 2], b3r = bre[r * 4 + 3];
                const double b0i = bim[r * 4 + 0], b1i = bim[r * 4 + 1];
                const double b2i = bim[r * 4 + 2], b3i = bim[r * 4 + 3];
                double *__restrict t = tmp.data();
                for (int q = 0; q < gq; ++q)
                {
                    const double yre = a0r[q] * b0r - a0i[q] * b0i + a1r[q] * b1r - a1i[q] * b1i +
                                       a2r[q] * b2r - a2i[q] * b2i + a3r[q] * b3r - a3i[q] * b3i;
                    const double yim = a0r[q] * b0i + a0i[q] * b0r + a1r[q] * b1i + a1i[q] * b1r +
                                       a2r[q] * b2i + a2i[q] * b2r + a3r[q] * b3i + a3i[q] * b3r;
                    t[q] += yre * yre + yim * yim;
                }
            }
            double *arow = acc + static_cast<std::size_t>(p) * gq;
            for (int q = 0; q < gq; ++q)
                arow[q] += tmp[static_cast<std::size_t>(q)];
        }
        return;
    }
    for (int p = 0; p < g_tau; ++p)
    {
        const double *bre = blk_re + static_cast<std::size_t>(p) * r_count * na;
        const double *bim = blk_im + static_cast<std::size_t>(p) * r_count * na;
        std::fill(tmp.begin(), tmp.end(), 0.0);
        for (int r = 0; r < r_count; ++r)
        {
            const double *br = bre + static_cast<std::size_t>(r) * na;
            const double *bi = bim + static_cast<std::size_t>(r) * na;
            for (int q = 0; q < gq; ++q)
            {
                double yre = 0.0, yim = 0.0;
                for (int n = 0; n < na; ++n)
                {
                    const double ar = at.re[static_cast<std::size_t>(n) * gq + q];
                    const double ai = at.im[static_cast<std::size_t>(n) * gq + q];
                    yre += ar * br[n] - ai * bi[n];
                    yim += ar * bi[n] + ai * br[n];
                }
                tmp[static_cast<std::size_t>(q)] += yre * yre + yim * yim;
            }
        }
        double *arow = acc + static_cast<std::size_t>(p) * gq;
        for (int q = 0; q < gq; ++q)
            arow[q] += tmp[static_cast<std::size_t>(q)];
    }
}

} // namespace detail

std::vector<double> oversampled_dft2(const CMat &h, int g_tau, int g_theta)
{
    const int n_sub = h.rows();
    const int n_ant = h.cols();
    if (g_tau < n_sub || g_theta < n_ant)
        throw std::invalid_argument("oversampled_dft2: grid must be at least as fine as the data");

    // delay axis per antenna column
    std::vector<cxd> cols(static_cast<std::size_t>(g_tau) * n_ant);
    std::vector<cxd> tmp(g_tau);
    for (int n = 0; n < n_ant; ++n)
    {
        detail::delay_correlate(h.data() + n, n_sub, n_ant, g_tau, tmp.data());
        for (int p = 0; p < g_tau; ++p)
            cols[static_cast<std::size_t>(p) * n_ant + n] = tmp[p];
    }

    std::vector<double> sines(g_theta);
    for (int q = 0; q < g_theta; ++q)
        sines[q] = 2.0 * (q - g_theta / 2) / g_theta;
    const detail::AngleTable at = detail::make_angle_table_from_sines(sines, n_ant);

    std::vector<double> out(static_cast<std::size_t>(g_tau) * g_theta, 0.0);
    detail::combine_accumulate(cols.data(), g_tau, at, /*magnitude=*/true, out.data());
    return out;
}

} // namespace tagloc
