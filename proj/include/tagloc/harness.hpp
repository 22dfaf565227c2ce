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

#ifndef TAGLOC_HARNESS_HPP
#define TAGLOC_HARNESS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "tagloc/channel.hpp"
#include "tagloc/estimation.hpp"
#include "tagloc/positioning.hpp"

namespace tagloc
{

// Peak thresholds as fractions of each max-normalized spectrum. The 2D-FFT
// default sits above the first Dirichlet sidelobe (~0.22 for 40 subcarriers);
// lower values make the minimum-delay peak rule latch onto delay sidelobes.
// The 2D-MUSIC default plays the same role for the shallow secondary dips of
// a noisy pseudo-spectrum.
struct EstimatorThresholds
{
    double fft2d = 0.3;
    double music2d = 0.8;
    double srae = 0.5;
    double jrac_min = 0.2;
    double jrac_max = 0.6;
    double cir = 0.5;
};

// Full description of one Monte-Carlo experiment: world, waveform, grids,
// method selection and solver parameters.
struct ExperimentConfig
{
    // scenario
    int dim = 2;
    std::vector<Position> tx_positions;
    std::vector<Position> rx_positions;
    int rx_n_elements = 4;
    FrameTransform rx_frame = FrameTransform::identity(2);
    double region_x[2] = {-18.0, 0.0};
    double region_y[2] = {0.0, 6.0};
    int tag_grid[2] = {5, 5};
    bool random_tags = false;
    int n_scatterers = 2;
    WaveformConfig waveform;
    double snr_db = 5.0;

    // estimation
    int g_tau = 4096;
    int g_theta = 128;
    std::vector<std::string> estimators{"fft2d", "music2d", "srae", "jrac", "cir"};
    EstimatorThresholds thresholds;

    // positioning
    std::vector<std::string> positioners{"ml_grid", "ml_gradient", "irls"};
    double grid_pitch = 0.05;
    double grid_region_x[2] = {-18.0, 0.0};
    double grid_region_y[2] = {0.0, 6.0};
    GradientAscentConfig gradient;
    IrlsConfig irls;
    double sigma_range = 1.0;
    double kappa_angle = 1.0;

    // experiment
    int n_trials = 1;
    std::uint64_t seed = 1;
    int threads = 1;
    std::string out_dir = "out";
};

// Defaults mirror the simulated deployment: four TXs at the corners of an
// 18 x 6 m area, one 4-element RX at its center, a 5 x 5 tag grid, 5 dB SNR.
ExperimentConfig default_config();

// Strict JSON round-trip; unknown keys are rejected.
ExperimentConfig load_config(const std::string &path);
void save_config(const std::string &path, const ExperimentConfig &cfg);

// Throws std::runtime_error when the configuration is inconsistent.
void validate_config(const ExperimentConfig &cfg);

// One result row. Estimator rows carry range/angle errors; positioning rows
// (method "positioner:estimator") carry the position error. Fields that do
// not apply hold NaN.
struct TrialRecord
{
    int trial = 0;
    int tag = 0;
    std::string method;
    double range_err_m = 0.0;
    double angle_err_rad = 0.0;
    double pos_err_m = 0.0;
    long long time_ns = 0;
    bool failed = false;
};

struct CdfTable
{
    std::string method;
    std::vector<double> values;    // sorted error magnitudes
    std::vector<double> ordinates; // empirical CDF, non-decreasing in (0, 1]
    int n_total = 0;
    int n_failed = 0;
    double failure_rate = 0.0;
};

struct BenchResult
{
    std::string method;
    double median_ns = 0.0;
    double mean_ns = 0.0;
    int calls = 0;
};

// Scenario for one trial: fixed (or seeded-random) tag placement plus the
// trial's scatterer draw.
Scenario make_scenario(const ExperimentConfig &cfg, Rng &rng);

// A planar ULA observes only sin(azimuth), so every azimuth estimate has a
// front/back fold. Resolves the fold of each antenna-frame azimuth toward the
// side consistent with a range-only pseudo-linear pre-solve (falling back to
// the raw fold when ranges alone cannot localize), and returns world-frame
// unit vectors ready for fusion.
std::vector<Position> resolve_angle_directions(const std::vector<double> &azimuths_antenna,
                                               const FrameTransform &frame,
                                               const MeasurementSet &ranges_only);

// Monte-Carlo run over cfg.n_trials independent channel realizations.
// Per-trial randomness derives from (seed, trial), so results do not depend
// on the thread count. Estimator failures are recorded, never fatal.
std::vector<TrialRecord> run_experiment(const ExperimentConfig &cfg);

// Empirical CDF of error magnitudes; NaN entries count as failures and are
// excluded from the curve.
CdfTable compute_cdf(const std::string &method, const std::vector<double> &errors);

// Median/mean wall time per estimator and positioner on one synthesized
// channel realization (estimation and solve calls only, synthesis excluded).
// Always single-threaded.
std::vector<BenchResult> bench_runtimes(const ExperimentConfig &cfg, int calls = 20,
                                        int warmup = 1);

// records.csv + cdf.csv + summary.json (+ bench.json when benches nonempty)
// under out_dir (created if needed). Stable column order; deterministic
// apart from the time_ns column.
void emit_results(const std::vector<TrialRecord> &records, const std::vector<CdfTable> &cdfs,
                  const std::vector<BenchResult> &benches, const std::string &out_dir);

// Helpers shared by the CLI and the tests.
std::string records_to_csv(const std::vector<TrialRecord> &records);
std::vector<TrialRecord> records_from_csv(const std::string &csv_text);

} // namespace tagloc

#endif
