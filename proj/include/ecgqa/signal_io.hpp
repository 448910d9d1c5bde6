#pragma once

#include "ecgqa/types.hpp"

#include <string>

namespace ecgqa {

/// CSV layout: header `lead,sample_rate_hz,n_samples`, then one row per lead
/// carrying the lead name, rate, sample count and the millivolt values.
/// Metadata travels in a sidecar JSON next to the CSV (same stem, .json).
void write_signal_csv(const DigitalEcg& signal, const std::string& csv_path);
DigitalEcg read_signal_csv(const std::string& csv_path);

std::string signal_sidecar_path(const std::string& csv_path);

} // namespace ecgqa
