#include "report.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <unistd.h>

namespace webaudit::cli {

std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

namespace {

Json at(const Sample& s, const char* xname, const char* yname) { return {{xname, s.x}, {yname, s.y}}; }

}  // namespace

Json summarize(const std::vector<Sample>& samples, const char* xname, const char* yname) {
  Json out;
  int count = 0, failed = 0;
  double sum = 0;
  const Sample *lo = nullptr, *hi = nullptr, *big = nullptr;
  for (const auto& s : samples) {
    if (!s.value) {
      ++failed;
      continue;
    }
    ++count;
    sum += *s.value;
    if (!lo || *s.value < *lo->value) lo = &s;
    if (!hi || *s.value > *hi->value) hi = &s;
    if (!big || std::abs(*s.value) > std::abs(*big->value)) big = &s;
  }
  out["count"] = count;
  out["failed"] = failed;
  if (count == 0) return out;
  out["min"] = number(*lo->value);
  out["min_at"] = at(*lo, xname, yname);
  out["max"] = number(*hi->value);
  out["max_at"] = at(*hi, xname, yname);
  out["mean"] = number(sum / count);
  out["max_abs"] = number(std::abs(*big->value));
  out["max_abs_at"] = at(*big, xname, yname);
  return out;
}

Json residual_array(const std::vector<Sample>& samples, const char* xname, const char* yname) {
  Json out = Json::array();
  for (const auto& s : samples) {
    Json r = at(s, xname, yname);
    r["value"] = s.value ? number(*s.value) : Json(nullptr);
    if (!s.error.empty()) r["error"] = s.error;
    out.push_back(std::move(r));
  }
  return out;
}

void write_atomic(const std::string& path, const std::string& text) {
  namespace fs = std::filesystem;
  fs::path target(path);
  if (target.has_parent_path() && !fs::is_directory(target.parent_path()))
    throw std::runtime_error("output directory " + target.parent_path().string() + " does not exist");
  fs::path tmp = target;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << text;
    out.close();
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw std::runtime_error("cannot replace " + path + ": " + ec.message());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string mask_wall_time(const std::string& report) {
  static const std::regex wall(R"re("wall_ms"\s*:\s*[-+0-9.eE]+)re");
  return std::regex_replace(report, wall, "\"wall_ms\": 0");
}

}  // namespace webaudit::cli
