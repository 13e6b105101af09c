#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "chebtt/calibration.hpp"
#include "chebtt/chebyshev.hpp"
#include "chebtt/rough_bergomi.hpp"
#include "chebtt/tensor_train.hpp"
#include "chebtt/vol_surface.hpp"

// File formats for tensors, surfaces, parameters, and reports. Byte layouts
// are documented in docs/FORMATS.md. Every writer is deterministic: the same
// in-memory value always produces the same bytes, so artifact files can be
// compared directly across runs.

namespace chebtt {

// Insertion-ordered JSON keeps key order stable across writes.
using Json = nlohmann::ordered_json;

// Shortest decimal string that parses back to exactly the same double.
[[nodiscard]] std::string format_double(double v);

// Writes j with two-space indentation and a trailing newline, creating parent
// directories as needed. Throws BuildError on IO failure.
void save_json(const std::filesystem::path& file, const Json& j);
[[nodiscard]] Json load_json(const std::filesystem::path& file);

// Dense tensor: binary file (magic "CHEBFULL") holding the grid and the value
// array in row-major order, plus a human-readable sidecar at <file>.json.
// Loading reads the binary file only and rebuilds coefficients.
void save_dense_tensor(const std::filesystem::path& file, const ChebyshevTensor<double>& t);
[[nodiscard]] ChebyshevTensor<double> load_dense_tensor(const std::filesystem::path& file);

// Tensor train: binary file (magic "CHEBTTEN") holding mode sizes, ranks, the
// optional grid, and the cores in column-major unfolding order, plus a sidecar
// at <file>.json.
void save_tensor_train(const std::filesystem::path& file, const TensorTrain<double>& t);
[[nodiscard]] TensorTrain<double> load_tensor_train(const std::filesystem::path& file);

Json spec_to_json(const SurfaceSpec& spec);
[[nodiscard]] SurfaceSpec spec_from_json(const Json& j);

Json surface_to_json(const VolSurface& s);
[[nodiscard]] VolSurface surface_from_json(const Json& j);

// Parameters serialize without validation (a calibration result may sit
// outside the physical range if the search box allowed it); parsing validates.
Json params_to_json(const RoughBergomiParams& p);
[[nodiscard]] RoughBergomiParams params_from_json(const Json& j);

Json mc_config_to_json(const MCConfig& mc);
[[nodiscard]] MCConfig mc_config_from_json(const Json& j);

// Reproducible content only: wall time is excluded so byte comparison across
// runs is meaningful. Callers report timing in sibling files.
Json calibration_to_json(const CalibrationResult& r);

// Quotes as CSV: header row "maturity,<strikes...>", one row per maturity.
// Invalid cells are written as empty fields; weights are not carried. Reading
// assigns unit weights and marks empty or non-positive cells invalid.
void write_surface_csv(const std::filesystem::path& file, const VolSurface& s);
[[nodiscard]] VolSurface read_surface_csv(const std::filesystem::path& file);

// Generic per-cell matrix over a surface spec (error heatmaps and the like):
// same orientation as write_surface_csv, every cell written.
void write_heatmap_csv(const std::filesystem::path& file, const SurfaceSpec& spec,
                       const Eigen::MatrixXd& cells);

}  // namespace chebtt
