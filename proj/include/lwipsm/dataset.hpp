#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "lwipsm/messages.hpp"
#include "lwipsm/reading.hpp"
#include "lwipsm/rng.hpp"

namespace lwipsm {

/// Fine-grained readings per meter, each stream sorted by time.
using Dataset = std::map<MeterId, std::vector<Reading>>;

/// "meter-0000", "meter-0001", ...
std::vector<MeterId> meter_ids(std::size_t count);

/// CSV with header timestamp,meter_id,active_kwh,reactive_kvarh.
/// Rows of one meter must be strictly increasing in time. In strict mode
/// consecutive rows must be exactly 15 minutes apart; otherwise any gap that
/// is a whole number of intervals is accepted. Throws DatasetError naming the row.
Dataset parse_dataset(std::string_view csv, bool strict = true);
Dataset load_dataset(const std::filesystem::path& path, bool strict = true);

std::string dataset_to_csv(const Dataset& d);

struct SyntheticParams {
    std::size_t meters = 20;
    DateTime start;
    std::size_t days = 8;
    /// Average household draw in kW.
    double mean_kw = 0.6;
};

/// Daily load shape with morning and evening peaks, per-meter scale and jitter.
Dataset synthetic_dataset(const SyntheticParams& p, Rng& rng);

}  // namespace lwipsm
