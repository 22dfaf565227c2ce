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

#ifndef TAGLOC_POSITIONING_HPP
#define TAGLOC_POSITIONING_HPP

#include <array>
#include <string>
#include <vector>

#include "tagloc/geometry.hpp"

namespace tagloc
{

// Bistatic range measurement between tx_index and rx_index, with the
// Gaussian noise scale sigma (meters).
struct RangeMeasurement
{
    double d_hat = 0.0;
    double sigma = 1.0;
    int tx_index = 0;
    int rx_index = 0;
};

// Direction measurement at rx_index: unit vector in the world frame with
// von Mises-Fisher concentration kappa.
struct AngleMeasurement
{
    Position u_hat;
    double kappa = 1.0;
    int rx_index = 0;
};

struct MeasurementSet
{
    std::vector<RangeMeasurement> ranges;
    std::vector<AngleMeasurement> angles;
    std::vector<Position> tx_positions;
    std::vector<Position> rx_positions;
    int dim = 2;
};

struct PositionEstimate
{
    Position p;
    double objective = 0.0; // log-likelihood (ML methods) or residual norm (IRLS)
    int iterations = 0;
    std::string method;
    bool ok = false;
};

// Joint log-likelihood of a candidate position: Gaussian range terms plus
// von Mises-Fisher direction terms (additive constants dropped).
double log_likelihood(const Position &p, const MeasurementSet &m);

// Closed-form gradient of log_likelihood.
Position grad_log_likelihood(const Position &p, const MeasurementSet &m);

struct Box
{
    Position lo;
    Position hi;
};

// Exhaustive maximization of the log-likelihood on a regular grid of pitch
// eps; ties resolve to the lowest index.
PositionEstimate ml_grid_search(const MeasurementSet &m, const Box &region, double eps);

// Center, vertices and co-vertices of the ellipse with the measurement's
// TX/RX as foci and d_hat as the total string length. Infeasible d_hat
// (<= focal distance) collapses the minor axis onto the focal segment.
std::array<Position, 5> ellipse_seed_points(const RangeMeasurement &r, const MeasurementSet &geom);

struct GradientAscentConfig
{
    std::vector<double> step_set{0.001, 0.01, 0.1, 1.0};
    int k_max = 100;
    double eps_stop = 1e-3;
};

// Gradient ascent with per-iteration line search over step_set, restarted
// from the five ellipse seeds of every range measurement; the run with the
// best final likelihood wins. Terminates a run early when no step in the
// set improves the objective.
PositionEstimate ml_gradient_ascent(const MeasurementSet &m, const GradientAscentConfig &cfg);

// Pseudo-linear system Phi * Upsilon = rhs in the unknowns
// [p; ||p - p_RX,1||; ...], with range rows scaled so their right-hand side
// is exactly 1. Row-major Phi.
struct PseudoLinearSystem
{
    std::vector<double> phi;
    std::vector<double> rhs;
    int rows = 0;
    int cols = 0;
};
PseudoLinearSystem build_pseudolinear(const MeasurementSet &m);

struct IrlsConfig
{
    int iterations = 5;
    double eps_weight = 1e-6;
};

// Iteratively re-weighted least squares on the pseudo-linear system with
// w_i = 1/(e_i^2 + eps), followed by the second-stage projection that
// restores consistency between the position block and the RX distances.
PositionEstimate irls_solve(const MeasurementSet &m, const IrlsConfig &cfg);

} // namespace tagloc

#endif
