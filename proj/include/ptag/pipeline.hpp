#pragma once

#include <functional>
#include <vector>

#include "ptag/analysis.hpp"
#include "ptag/config.hpp"
#include "ptag/correlator.hpp"
#include "ptag/optics.hpp"
#include "ptag/types.hpp"

namespace ptag {

/// Full source -> optics -> detector chain, returning the detected stream.
/// CW and coherent sources are generated and pushed through in chunks sized
/// to a bounded tag budget, with detector state carried across chunk edges,
/// so arbitrarily long runs use flat memory for the in-flight stage (the
/// detected output itself is materialized here).
TagStream run_chain(const SimSetup& s, SimMode mode, RoutingMode routing);

/// Same chain, but the detected tags feed a streaming correlator and are
/// discarded, so nothing scales with duration. CW source, Population routing.
G2Histogram run_chain_g2(const SimSetup& s, double bin_width_ns,
                         double tau_max_ns);

/// Angles of the configured scan grid, endpoint inclusive.
std::vector<double> scan_angles(const ScanGrid& grid);

/// One chain run per scan angle (VisibilityScan routing, point_duration_s
/// each, per-point derived seeds); the callback receives each detected
/// stream, e.g. to write it out. Returns the per-angle counts.
std::vector<ScanPoint> run_scan(
    const SimSetup& s,
    const std::function<void(std::size_t, double, const TagStream&)>& sink = {});

}  // namespace ptag
