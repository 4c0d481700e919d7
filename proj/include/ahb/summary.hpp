#ifndef AHB_SUMMARY_HPP
#define AHB_SUMMARY_HPP

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>

#include "ahb/certify.hpp"
#include "ahb/trace.hpp"
#include "json.hpp"

namespace ahb {

// Aggregates over the recorded rows only, so thinning with record_every
// changes the fitted rates but not the final-row quantities.
struct TraceSummary {
  double final_gap = 0.0;
  std::optional<double> final_dist;
  std::int64_t iterations = 0;
  double min_beta = 0.0;
  double max_beta = 0.0;
  std::optional<RateFit> linear_rate;
  std::optional<RateFit> power_rate;
  std::string stop_reason;
};

inline TraceSummary summarize(const Trace& trace) {
  if (trace.records.empty()) throw InvalidInput("summarize: trace has no records");
  TraceSummary s;
  const auto& last = trace.records.back();
  s.final_gap = last.gap;
  s.final_dist = last.dist;
  s.iterations = last.k;
  s.stop_reason = trace.meta.stop_reason;
  auto [lo, hi] = std::minmax_element(trace.records.begin(), trace.records.end(),
                                      [](const auto& a, const auto& b) { return a.beta < b.beta; });
  s.min_beta = lo->beta;
  s.max_beta = hi->beta;
  try {
    s.linear_rate = fit_rate_from_trace(trace, RateModel::linear);
    s.power_rate = fit_rate_from_trace(trace, RateModel::power);
  } catch (const InvalidInput&) {
    // not enough positive distances
  }
  return s;
}

inline void to_json(nlohmann::json& j, const TraceSummary& s) {
  auto opt = [](const auto& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  j = nlohmann::json{{"final_gap", s.final_gap},
                     {"final_dist", opt(s.final_dist)},
                     {"iterations", s.iterations},
                     {"min_beta", s.min_beta},
                     {"max_beta", s.max_beta},
                     {"linear_rate", opt(s.linear_rate)},
                     {"power_rate", opt(s.power_rate)},
                     {"stop_reason", s.stop_reason}};
}

}  // namespace ahb

#endif  // AHB_SUMMARY_HPP
