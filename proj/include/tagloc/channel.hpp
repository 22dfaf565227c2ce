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

#ifndef TAGLOC_CHANNEL_HPP
#define TAGLOC_CHANNEL_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "tagloc/geometry.hpp"
#include "tagloc/linalg.hpp"
#include "tagloc/util.hpp"

namespace tagloc
{

// OFDM illumination waveform parameters.
struct WaveformConfig
{
    int n_subcarriers = 40;        // N_s
    double bandwidth_hz = 40e6;    // B
    double center_freq_hz = 897.5e6;
    double shift_hz = 45e6;        // tag frequency shift
    int n_symbols = 50;            // N_sym
};

// World description for one simulated deployment.
struct Scenario
{
    int dim = 2;
    std::vector<Position> tx_positions;
    std::vector<Position> rx_positions;
    ArrayGeometry rx_array;
    FrameTransform rx_frame = FrameTransform::identity(2);
    std::vector<Position> tags;
    std::vector<Position> scatterers;
    WaveformConfig waveform;
    double snr_db = 5.0;
    std::uint64_t seed = 1;
};

// One propagation path: complex gain, bandwidth-normalized delay (samples)
// and arrival direction at the receiving end of the leg.
struct Path
{
    cxd gain{1.0, 0.0};
    double delay = 0.0;
    Aoa aoa;
};

// Paths of one channel leg; paths[0] is always the line-of-sight path and
// carries the smallest delay.
struct PathSet
{
    std::vector<Path> paths;
    int size() const { return static_cast<int>(paths.size()); }
};

enum class ChannelKind
{
    carrier,
    backscatter
};

// Per-symbol channel frequency responses (n_subcarriers x n_antennas each).
struct CfrStack
{
    std::vector<CMat> symbols;
    ChannelKind kind = ChannelKind::carrier;
    int tx_index = 0;
    int rx_index = 0;
    int tag_index = -1; // -1 for carrier stacks
};

struct TriplePaths
{
    PathSet carrier; // TX -> RX
    PathSet tx_tag;  // TX -> tag
    PathSet tag_rx;  // tag -> RX
};

// One leg of propagation from src to dst: the line-of-sight path plus one
// single-bounce path per scatterer. Scattered-path gain magnitudes fall off
// as the inverse total leg length, normalized so the line-of-sight magnitude
// is 1; phases are uniform. rng drives the phase draws only.
PathSet build_leg_paths(const Position &src, const Position &dst,
                        const std::vector<Position> &scatterers, double bandwidth_hz, Rng &rng);

// Builds the three path sets for one TX-RX-tag triple (carrier leg, TX-tag
// leg, tag-RX leg), all sharing the scenario's scatterer set.
TriplePaths build_paths(const Scenario &sc, int tag_index, int tx_index, int rx_index, Rng &rng);

// Per-symbol multiplicative gain perturbation, used by subspace-rank tests.
// Default (0) keeps the channel static across symbols.
struct SynthesisOptions
{
    double gain_jitter = 0.0;
    Rng *rng = nullptr;
};

// Channel synthesis from a path set: H = F(tau) D A^T(theta, phi), replicated
// across the configured number of symbols.
CfrStack carrier_cfr(const PathSet &paths, const WaveformConfig &wf, const ArrayGeometry &array,
                     int tx_index = 0, int rx_index = 0,
                     const SynthesisOptions &opt = SynthesisOptions{});

// Composes TX-tag and tag-RX legs into the bistatic path set: delays add,
// the arrival direction is the tag-RX leg's, and the tag frequency shift
// contributes exp(-j*2*pi*F_shift*tau2/B) to the effective gain.
PathSet compose_bistatic(const PathSet &tx_tag, const PathSet &tag_rx, const WaveformConfig &wf);

CfrStack backscatter_cfr(const PathSet &tx_tag, const PathSet &tag_rx, const WaveformConfig &wf,
                         const ArrayGeometry &array, int tx_index = 0, int rx_index = 0,
                         int tag_index = 0, const SynthesisOptions &opt = SynthesisOptions{});

// Adds i.i.d. circular complex Gaussian noise per entry per symbol, with the
// variance set from the stack's mean per-entry signal power and the target
// SNR. An infinite snr_db returns the input unchanged.
CfrStack add_noise(CfrStack stack, double snr_db, Rng &rng);

// Same, with the complex noise variance given directly.
CfrStack add_noise_with_variance(CfrStack stack, double noise_variance, Rng &rng);

// Dataset persistence (JSON container, version 1). Round-trips all scenario
// fields and complex entries losslessly; throws std::runtime_error on I/O
// failure, version mismatch or schema violations.
void save_dataset(const std::string &path, const Scenario &sc, const std::vector<CfrStack> &stacks);
std::pair<Scenario, std::vector<CfrStack>> load_dataset(const std::string &path);

} // namespace tagloc

#endif
