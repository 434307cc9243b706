#pragma once

#include <span>
#include <vector>

#include "drowsy/types.hpp"

namespace drowsy::labels {

// Event onsets with their (possibly smoothed) drowsiness indices.
struct EventIndexSeries {
  std::vector<double> onsets_s;  // strictly ascending
  std::vector<double> indices;   // in [0, 1]
};

// max{0, (1 - e^-(tau-tau0)) / (1 + e^-(tau-tau0))}: 0 at or below tau0,
// saturating towards 1 for slow responses.
double drowsiness_index(double tau_s, double tau0_s);

EventIndexSeries index_series_from_events(
    std::span<const LaneDepartureEvent> events, double tau0_s);

// Square moving average over event indices. Causal: the window at onset t is
// [t - window_s, t]. Centered (optional): [t - window_s/2, t + window_s/2].
EventIndexSeries smooth_indices(const EventIndexSeries& events,
                                double window_s, bool centered = false);

// Label at grid time t = index of the most recent event with onset <= t;
// grid points before the first event take the first event's value.
LabelVector labels_on_grid(const EventIndexSeries& events,
                           const SampleGrid& grid);

}  // namespace drowsy::labels
