#pragma once

#include <string>

#include "smanifold/core.hpp"

namespace smanifold {

// Builds a system with exact (automatic-differentiation) Jacobians from expression text.
SingularSystem system_from_source(const SystemSource& src, int dim, const std::string& name = "custom",
                                  std::optional<double> delta = std::nullopt);

// { "dim": N, "zeta": "...", "phi_s": [...], "phi_ns": [...], "delta": d? }
SingularSystem parse_system_json(const std::string& text, const std::string& name = "custom");
SingularSystem load_system_json(const std::string& path);
// Throws Error if the system has no expression source.
std::string export_system_json(const SingularSystem& sys);

}  // namespace smanifold
