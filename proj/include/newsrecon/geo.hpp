#pragma once

namespace newsrecon {

/// Latitude/longitude in degrees.
struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;

  /// Throws PreconditionError when outside [-90,90] x [-180,180].
  void validate() const;
  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

}  // namespace newsrecon
