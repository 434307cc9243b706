#include "drowsy/labels.hpp"

#include <algorithm>
#include <cmath>

#include "drowsy/errors.hpp"

namespace drowsy::labels {

double drowsiness_index(double tau_s, double tau0_s) {
  if (!(tau_s > 0) || !(tau0_s > 0)) {
    throw DataError("drowsiness_index: tau and tau0 must be positive");
  }
  const double e = std::exp(-(tau_s - tau0_s));
  return std::max(0.0, (1.0 - e) / (1.0 + e));
}

EventIndexSeries index_series_from_events(
    std::span<const LaneDepartureEvent> events, double tau0_s) {
  EventIndexSeries out;
  out.onsets_s.reserve(events.size());
  out.indices.reserve(events.size());
  for (const auto& ev : events) {
    out.onsets_s.push_back(ev.onset_s);
    out.indices.push_back(drowsiness_index(ev.response_time_s, tau0_s));
  }
  return out;
}

EventIndexSeries smooth_indices(const EventIndexSeries& events,
                                double window_s, bool centered) {
  if (events.onsets_s.empty()) throw DataError("smooth_indices: empty series");
  if (!(window_s > 0)) throw DataError("smooth_indices: window must be positive");

  const std::size_t n = events.onsets_s.size();
  EventIndexSeries out;
  out.onsets_s = events.onsets_s;
  out.indices.resize(n);

  for (std::size_t i = 0; i < n; ++i) {
    const double t = events.onsets_s[i];
    const double lo = centered ? t - window_s / 2.0 : t - window_s;
    const double hi = centered ? t + window_s / 2.0 : t;
    double sum = 0.0;
    long count = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (events.onsets_s[j] >= lo && events.onsets_s[j] <= hi) {
        sum += events.indices[j];
        ++count;
      }
    }
    out.indices[i] = sum / static_cast<double>(count);  // window includes i
  }
  return out;
}

LabelVector labels_on_grid(const EventIndexSeries& events,
                           const SampleGrid& grid) {
  if (events.onsets_s.empty()) throw DataError("labels_on_grid: empty series");

  LabelVector out;
  out.grid = grid;
  out.values.resize(grid.count);
  for (int i = 0; i < grid.count; ++i) {
    const double t = grid.time_at(i);
    // Most recent event at or before t; grid points before the first event
    // backfill with it.
    auto it = std::upper_bound(events.onsets_s.begin(), events.onsets_s.end(), t);
    const std::size_t idx =
        it == events.onsets_s.begin()
            ? 0
            : static_cast<std::size_t>(it - events.onsets_s.begin()) - 1;
    out.values[i] = events.indices[idx];
  }
  return out;
}

}  // namespace drowsy::labels
