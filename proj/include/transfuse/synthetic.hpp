#pragma once

#include <array>
#include <cstdint>

#include "transfuse/cohort.hpp"

namespace transfuse {

// Class-conditional location/scale of one feature's per-encounter mean.
// For log-normal features `median_*` is exp(mu) and `spread_*` the sigma of
// log values; otherwise they are the normal median and standard deviation.
struct FeatureProfile {
  double median_negative = 0.0;
  double median_positive = 0.0;
  double spread_negative = 1.0;
  double spread_positive = 1.0;
  bool log_normal = false;
  int sampling_hours = 1;
  double missing_rate = 0.0;  // probability an encounter never records the variable
};

using FeatureProfiles = std::array<FeatureProfile, kFeatureCount>;

// Defaults follow the cohort-characteristics medians where reported; other
// variables get class-independent physiological ranges.
FeatureProfiles default_feature_profiles();

// All variables class-independent except hemoglobin and platelets.
FeatureProfiles planted_signal_profiles();

struct SyntheticCohortSpec {
  int n_encounters_per_year = 10000;
  int first_year = kFirstYear;
  int last_year = kLastYear;
  double transfused_fraction = 0.254;
  double mtp_fraction = 0.01;             // extra encounters built to violate the 6h rule
  double mean_extra_transfusions = 0.7;   // events per transfused encounter = 1 + Poisson(this)
  double walk_fraction = 0.25;            // hourly deviation scale relative to the class spread
  FeatureProfiles features = default_feature_profiles();
  std::uint64_t seed = 7;

  // Throws ValidationError when a field is out of range.
  void validate() const;
};

RawTables generate_synthetic_cohort(const SyntheticCohortSpec& spec);

}  // namespace transfuse
