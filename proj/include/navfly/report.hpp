#pragma once

#include <string>

#include "navfly/flywheel.hpp"

namespace navfly {

inline constexpr const char* kReportCsvHeader =
    "iteration,split,episodes,ne,sr,os,spl,ndtw,deviations,corrections,sampled,oracle_added,checkpoint";

/// One row for the baseline validation (iteration 0), then a train row and a
/// validation row per iteration. Train rows describe the model that was
/// evaluated to mine corrections in that iteration.
[[nodiscard]] std::string report_csv(const FlywheelRunRecord& run);

/// Two panels, validation SR and NE against iteration. Each series has one
/// marker per iteration; the baseline is a dashed horizontal line.
[[nodiscard]] std::string report_svg(const FlywheelRunRecord& run);

}  // namespace navfly
