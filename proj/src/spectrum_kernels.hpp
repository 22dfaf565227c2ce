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

// Internal spectrum building blocks shared by linalg.cpp and estimation.cpp.

#ifndef TAGLOC_SPECTRUM_KERNELS_HPP
#define TAGLOC_SPECTRUM_KERNELS_HPP

#include <complex>
#include <vector>

#include "tagloc/linalg.hpp"

namespace tagloc::detail
{

bool is_pow2(int n);

// Correlates the length-n_sub column x (subcarrier rows m = -Ns/2..Ns/2-1)
// against the delay response over the oversampled grid
// tau_p = n_sub * p / g_tau, p = 0..g_tau-1:
//   out[p] = sum_m x[m] * exp(+j*2*pi*(m - n_sub/2)*p/g_tau)
// x is given with stride `stride` between consecutive subcarriers.
// FFT-backed when g_tau is a power of two, direct evaluation otherwise.
void delay_correlate(const cxd *x, int n_sub, int stride, int g_tau, cxd *out);

// Angle response table for the combine kernels: for each angle column q the
// conjugated per-element response conj(a_n(theta_q)), split into re/im planes
// laid out [n][q] (q contiguous).
struct AngleTable
{
    int n_ant = 0;
    int g_theta = 0;
    std::vector<double> re; // n_ant * g_theta
    std::vector<double> im;
};

// v_q = 2*(q - g_theta/2)/g_theta; phase of element n is pi*n*v_q for a
// half-wavelength ULA. Used by the internal kernels where the array is a ULA
// expressed through sin(theta); general arrays go through steering_vector.
AngleTable make_angle_table_from_sines(const std::vector<double> &sines, int n_ant);

// acc[p*g_theta + q] (+)= |sum_n row_p[n] * conj(a_n(q))| for all p, q.
// rows: g_tau rows of n_ant complex values (delay-transformed channel);
// if accumulate_magnitude is true adds |z| (2D-FFT style), otherwise |z|^2.
void combine_accumulate(const cxd *__restrict rows, int g_tau, const AngleTable &at,
                        bool magnitude, double *__restrict acc);

// Same combine for a batch of matrices stored per tau-row as
// [r][n] (block size n_rows_per_tau = r_count * n_ant), accumulating
// |z|^2 summed over r. Used by the MUSIC pseudo-spectrum denominator.
void batch_norm_accumulate(const double *__restrict blk_re, const double *__restrict blk_im,
                           int g_tau, int r_count, const AngleTable &at,
                           double *__restrict acc);

} // namespace tagloc::detail

#endif
