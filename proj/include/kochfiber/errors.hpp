#pragma once

#include <stdexcept>
#include <string>

namespace kochfiber {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GeometryError : Error { using Error::Error; };
struct AmplitudeOutOfRange : GeometryError { using GeometryError::GeometryError; };
struct OverlapViolation : GeometryError { using GeometryError::GeometryError; };
struct ResourceLimit : Error { using Error::Error; };
struct PointOutsideFiber : Error { using Error::Error; };
struct PointOutsideDomain : Error { using Error::Error; };
struct MeshQualityFailure : Error { using Error::Error; };
struct StitchingFailure : Error { using Error::Error; };
struct NonConvergence : Error { using Error::Error; };
struct GraphNodeOutsideMesh : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

}  // namespace kochfiber
