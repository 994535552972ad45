#pragma once

#include <string>
#include <vector>

#include "cael/harness.hpp"

// Minimal self-contained SVG charts for the experiment outputs. Value axes
// are logarithmic to match how bias/variance/MSE spread over decades.
namespace cael::harness::svg {

/// Grouped bars of bias^2 / variance / MSE per estimator (one run).
std::string metric_bars(const std::vector<MetricsRow>& rows);

/// MSE (with CI band) against the sweep value, one line per estimator.
/// log_x selects a logarithmic sweep axis (used for n).
std::string sweep_lines(const std::vector<MetricsRow>& rows,
                        const std::string& param, bool log_x);

/// Empirical CDF of relative squared errors, log-scale ratio axis.
std::string cdf_steps(const std::vector<CdfTable>& tables);

}  // namespace cael::harness::svg
