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

#ifndef TAGLOC_ESTIMATION_HPP
#define TAGLOC_ESTIMATION_HPP

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tagloc/channel.hpp"
#include "tagloc/geometry.hpp"
#include "tagloc/linalg.hpp"

namespace tagloc
{

// Quantized search grids shared by all estimators: delays tau_i = Ns*i/Gtau
// and angles theta_j = asin(2j/Gtheta), j = -Gtheta/2 .. Gtheta/2-1.
struct GridSpec
{
    int n_subcarriers = 0;
    std::vector<double> tau;
    std::vector<double> theta;
    std::vector<double> sin_theta;

    int g_tau() const { return static_cast<int>(tau.size()); }
    int g_theta() const { return static_cast<int>(theta.size()); }

    static GridSpec make(int n_subcarriers, int g_tau, int g_theta);
};

// Real-valued spectrum over (a subset of) the delay grid times the full
// angle grid. values is row-major with one row per entry of tau_indices.
struct Spectrum2D
{
    std::vector<double> values;
    std::vector<int> tau_indices;
    int n_theta = 0;

    double at(int row, int q) const { return values[static_cast<std::size_t>(row) * n_theta + q]; }
};

struct RangeAngleEstimate
{
    double bistatic_range_m = 0.0;
    double azimuth_rad = 0.0; // antenna frame
    bool has_azimuth = false;
    double tau_carrier_hat = 0.0;
    double tau_backscatter_hat = 0.0;
    std::string method;
};

enum class EstimatorError
{
    none,
    no_peak,
    degenerate_subspace
};

struct EstimateOutcome
{
    std::optional<RangeAngleEstimate> estimate;
    EstimatorError error = EstimatorError::none;
    bool ok() const { return estimate.has_value(); }
};

// Carrier-side time of arrival (the TDoA reference). Shared by the
// harness so one carrier analysis serves every tag on the same TX-RX pair.
struct CarrierToa
{
    std::optional<double> tau0_hat;
    EstimatorError error = EstimatorError::none;
    bool ok() const { return tau0_hat.has_value(); }
};

// Estimation context: grids, receive array geometry and signal bandwidth.
struct EstimationSetup
{
    GridSpec grid;
    ArrayGeometry array;
    double bandwidth_hz = 40e6;
};

// Bistatic range from the TDoA rule: d = (c/B) * (tau0_true + tau_b - tau0).
double tdoa_to_range(double tau0_true, double tau_b_hat, double tau0_hat, double bandwidth_hz);

// Strict local maxima of a spectrum above a threshold; borders use one-sided
// comparisons so a line-of-sight response at the grid edge stays detectable.
struct GridPeak
{
    int row; // index into Spectrum2D::tau_indices
    int q;
    double value;
};
std::vector<GridPeak> find_peaks_2d(const Spectrum2D &s, double t_min);

// --- 2-D FFT -------------------------------------------------------------

// Per-symbol magnitude spectra accumulated over the stack, max-normalized.
Spectrum2D fft2d_spectrum(const CfrStack &stack, const EstimationSetup &setup);
CarrierToa fft2d_carrier_toa(const CfrStack &h0, const EstimationSetup &setup, double t_min);
EstimateOutcome fft2d_backscatter(const CfrStack &hb, const EstimationSetup &setup,
                                  double tau0_true, double tau0_hat, double t_min);
EstimateOutcome fft2d_estimate(const CfrStack &h0, const CfrStack &hb,
                               const EstimationSetup &setup, double tau0_true, double t_min);

// --- 2-D MUSIC -----------------------------------------------------------

// Pseudo-spectrum from the vectorized measurement stack (max-normalized).
// Model order comes from the MDL rule; err (optional) reports a missing
// noise subspace.
Spectrum2D music2d_spectrum(const CfrStack &stack, const EstimationSetup &setup,
                            EstimatorError *err = nullptr);
CarrierToa music2d_carrier_toa(const CfrStack &h0, const EstimationSetup &setup, double t_min);
EstimateOutcome music2d_backscatter(const CfrStack &hb, const EstimationSetup &setup,
                                    double tau0_true, double tau0_hat, double t_min);
EstimateOutcome music2d_estimate(const CfrStack &h0, const CfrStack &hb,
                                 const EstimationSetup &setup, double tau0_true, double t_min);

// --- stage-wise estimation (SRAE) ----------------------------------------

// Delay-domain MUSIC spectrum over the tau grid, max-normalized.
std::vector<double> delay_music_spectrum(const CfrStack &stack, const EstimationSetup &setup,
                                         EstimatorError *err = nullptr);
CarrierToa srae_carrier_toa(const CfrStack &h0, const EstimationSetup &setup, double t_min);
EstimateOutcome srae_backscatter(const CfrStack &hb, const EstimationSetup &setup,
                                 double tau0_true, double tau0_hat, double t_min);
EstimateOutcome srae_estimate(const CfrStack &h0, const CfrStack &hb,
                              const EstimationSetup &setup, double tau0_true, double t_min);

// --- joint range-angle clustering (JRAC) ----------------------------------

// Maximal runs of non-zero entries, as inclusive [first, last] index pairs.
std::vector<std::pair<int, int>> cluster_1d(const std::vector<double> &aggregated);

CarrierToa jrac_carrier_toa(const CfrStack &h0, const EstimationSetup &setup, double t_min,
                            double t_max);
EstimateOutcome jrac_backscatter(const CfrStack &hb, const EstimationSetup &setup,
                                 double tau0_true, double tau0_hat, double t_min, double t_max);
EstimateOutcome jrac_estimate(const CfrStack &h0, const CfrStack &hb,
                              const EstimationSetup &setup, double tau0_true, double t_min,
                              double t_max);

// --- range-only first-peak baseline ---------------------------------------

// Channel-impulse-response style baseline on antenna 0 only: accumulated 1-D
// magnitude spectrum, first local maximum at or above t_min * max.
CarrierToa cir_carrier_toa(const CfrStack &h0, const EstimationSetup &setup, double t_min);
EstimateOutcome cir_backscatter(const CfrStack &hb, const EstimationSetup &setup,
                                double tau0_true, double tau0_hat, double t_min);
EstimateOutcome cir_first_peak_range(const CfrStack &h0, const CfrStack &hb,
                                     const EstimationSetup &setup, double tau0_true, double t_min);

} // namespace tagloc

#endif
