#pragma once

#include <cstdio>
#include <fstream>
#include <string>

#include "topopt/error.hpp"
#include "topopt/optimizer.hpp"

namespace topopt::io {

inline std::string format_history_csv(const OptimizationHistory& h) {
  std::string out = "iter,compliance,volume_fraction,max_change,seconds\n";
  char buf[160];
  for (const auto& r : h.records) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.6f\n", r.iter, r.compliance, r.volume_fraction,
                  r.max_change, r.seconds);
    out += buf;
  }
  return out;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write '" + path + "'");
  f << text;
  if (!f) throw Error("failed writing '" + path + "'");
}

inline void write_history_csv(const std::string& path, const OptimizationHistory& h) {
  write_text(path, format_history_csv(h));
}

}  // namespace topopt::io
