#pragma once

#include <json.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace webaudit::cli {

using Json = nlohmann::ordered_json;

inline constexpr int kReportVersion = 1;

/// 64-bit FNV-1a as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view data);

/// One probe of a residual array.
struct Sample {
  double x = 0;
  double y = 0;
  std::optional<double> value;
  std::string error;
};

/// count, failed, min, max, mean, max_abs and the probes of the extremes.
Json summarize(const std::vector<Sample>& samples, const char* xname, const char* yname);
Json residual_array(const std::vector<Sample>& samples, const char* xname, const char* yname);

/// A finite double, or null.
Json number(double v);

/// Writes to a sibling temporary file and renames it over `path`.
void write_atomic(const std::string& path, const std::string& text);

std::string read_file(const std::string& path);

/// Report text with the wall-time value replaced by 0.
std::string mask_wall_time(const std::string& report);

}  // namespace webaudit::cli
