#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "nullflow/flow.hpp"
#include "nullflow/frames.hpp"
#include "nullflow/verify.hpp"

namespace nullflow {

/// Round-trip-safe decimal rendering (17 significant digits).
std::string format_double(double x);

std::string to_csv(const FramedCurve& c);
std::string to_csv(const CurveGrid& g);
std::string arclength_drift_csv(const CurveGrid& g);

/// Little-endian "NFGRID01" container: header (kind, nu, nt, extents) plus
/// 24 doubles per node in t-major order.
std::string to_binary(const CurveGrid& g);
CurveGrid grid_from_binary(std::string_view bytes);

std::string report_json(const std::vector<ResidualReport>& reports, const std::string& scenario,
                        EvolutionMode mode);
std::string report_text(const std::vector<ResidualReport>& reports);
std::string audit_json(const std::vector<AuditEntry>& entries, FrameKind kind,
                       std::uint64_t seed);
std::string audit_text(const std::vector<AuditEntry>& entries);

void write_file(const std::string& path, std::string_view data);
std::string read_file(const std::string& path);

}  // namespace nullflow
