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

#ifndef TAGLOC_LINALG_HPP
#define TAGLOC_LINALG_HPP

#include <complex>
#include <vector>

namespace tagloc
{

using cxd = std::complex<double>;

// Dense complex matrix, row-major.
class CMat
{
  public:
    CMat() : rows_(0), cols_(0) {}
    CMat(int rows, int cols) : rows_(rows), cols_(cols), d_(static_cast<std::size_t>(rows) * cols) {}

    static CMat identity(int n);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool empty() const { return d_.empty(); }

    cxd operator()(int r, int c) const { return d_[static_cast<std::size_t>(r) * cols_ + c]; }
    cxd &operator()(int r, int c) { return d_[static_cast<std::size_t>(r) * cols_ + c]; }

    const cxd *data() const { return d_.data(); }
    cxd *data() { return d_.data(); }
    const cxd *row(int r) const { return d_.data() + static_cast<std::size_t>(r) * cols_; }
    cxd *row(int r) { return d_.data() + static_cast<std::size_t>(r) * cols_; }

    CMat conjugate_transpose() const;
    double frobenius_norm() const;

  private:
    int rows_, cols_;
    std::vector<cxd> d_;
};

CMat matmul(const CMat &a, const CMat &b);

// Eigendecomposition of a Hermitian matrix: eigenvalues sorted descending,
// eigenvector columns orthonormal, a = V diag(lambda) V^H.
struct EvdResult
{
    std::vector<double> eigenvalues;
    CMat eigenvectors;
};

// Householder tridiagonalization followed by implicit-shift QL on the real
// tridiagonal form. Throws std::invalid_argument for non-square or
// non-Hermitian input (tolerance 1e-10 relative to the Frobenius norm).
EvdResult hermitian_evd(const CMat &a);

// Moore-Penrose pseudo-inverse via the Hermitian eigendecomposition of
// a^H a (or a a^H, whichever is smaller). Singular values below
// 1e-12 * sigma_max are treated as zero. rank_out, when non-null, receives
// the number of retained singular values.
CMat pseudo_inverse(const CMat &a, int *rank_out = nullptr);

// Oversampled 2-D spectrum magnitudes of an n_subcarriers x n_antennas
// channel matrix, evaluated on the delay grid tau_p = n_subcarriers*p/g_tau
// and the angle grid v_q = 2*(q - g_theta/2)/g_theta (v = sin azimuth).
// Rows of h are subcarriers m = -Ns/2 .. Ns/2-1; the transform correlates
// against the delay response and the array response, so a single
// on-grid propagation path peaks at its own (tau, v) cell.
// Uses a zero-padded FFT along the delay axis when g_tau is a power of two
// and direct evaluation otherwise. Result row-major g_tau x g_theta.
std::vector<double> oversampled_dft2(const CMat &h, int g_tau, int g_theta);

// Wax-Kailath minimum description length order selection from descending
// sample eigenvalues. Result clamped to [1, M-1].
int mdl_order(const std::vector<double> &eigenvalues_desc, long n_snapshots);

} // namespace tagloc

#endif
