#pragma once

#include <optional>
#include <string>
#include <vector>

namespace vcube {

enum class Sensor { Optical, Sar };

inline const char* to_string(Sensor s) {
  return s == Sensor::Optical ? "OPTICAL" : "SAR";
}

inline std::optional<Sensor> sensor_from_string(const std::string& s) {
  if (s == "OPTICAL") return Sensor::Optical;
  if (s == "SAR") return Sensor::Sar;
  return std::nullopt;
}

// Band names a product declaration may reference for each sensor kind.
inline const std::vector<std::string>& sensor_bands(Sensor s) {
  static const std::vector<std::string> optical = {"B02", "B03", "B04",  "B05",
                                                   "B08", "B11", "B12", "MASK"};
  static const std::vector<std::string> sar = {"VV", "VH", "CAL_A"};
  return s == Sensor::Optical ? optical : sar;
}

// Band every scene of this sensor kind must carry at ingest time.
inline const char* mandatory_band(Sensor s) {
  return s == Sensor::Optical ? "MASK" : "CAL_A";
}

}  // namespace vcube
