#include "transfuse/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "transfuse/errors.hpp"

namespace transfuse {

namespace {

FeatureProfile normal(double neg, double pos, double sd_neg, double sd_pos, int hours, double missing) {
  return {neg, pos, sd_neg, sd_pos, false, hours, missing};
}

FeatureProfile lognormal(double neg, double pos, double sd_neg, double sd_pos, int hours, double missing) {
  return {neg, pos, sd_neg, sd_pos, true, hours, missing};
}

FeatureProfile flat(double median, double sd, int hours, double missing) {
  return normal(median, median, sd, sd, hours, missing);
}

FeatureProfile flat_log(double median, double sd, int hours, double missing) {
  return lognormal(median, median, sd, sd, hours, missing);
}

void set(FeatureProfiles& p, std::string_view name, FeatureProfile profile) { p[*feature_index(name)] = profile; }

// Categorical shares per class {non-transfused, transfused}.
template <std::size_t N>
using Shares = std::array<std::array<double, N>, 2>;

constexpr Shares<2> kGenderShares{{{46.2, 53.8}, {50.0, 50.0}}};
constexpr Shares<3> kRaceShares{{{41.1, 50.7, 8.2}, {42.2, 49.4, 8.4}}};
constexpr Shares<3> kEthnicityShares{{{3.1, 89.6, 7.3}, {3.0, 90.0, 7.0}}};
constexpr Shares<10> kServiceShares{{{46.9, 0.4, 19.3, 2.0, 2.5, 7.5, 5.0, 1.3, 0.4, 14.6},
                                     {38.4, 0.6, 16.5, 2.5, 5.8, 3.4, 8.6, 3.5, 0.7, 20.1}}};
constexpr std::array<double, 2> kMortality{0.055, 0.107};
constexpr std::array<double, 2> kAgeMedian{62.0, 64.0};
constexpr std::array<double, 4> kProductShares{70.0, 12.0, 15.0, 3.0};

template <std::size_t N>
std::size_t draw(std::mt19937_64& rng, const std::array<double, N>& weights) {
  std::discrete_distribution<std::size_t> dist(weights.begin(), weights.end());
  return dist(rng);
}

Timestamp year_start(int year) {
  return std::chrono::sys_days{std::chrono::year{year} / std::chrono::January / 1};
}

enum class Kind { Negative, Transfused, Massive };

}  // namespace

FeatureProfiles default_feature_profiles() {
  FeatureProfiles p{};
  set(p, "temperature", flat(37.0, 0.6, 1, 0.02));
  set(p, "sbp_cuff", flat(120.0, 20.0, 1, 0.02));
  set(p, "dbp_cuff", flat(65.0, 12.0, 1, 0.02));
  set(p, "pulse", flat(88.0, 17.0, 1, 0.02));
  set(p, "unassisted_resp_rate", flat(18.0, 5.0, 1, 0.05));
  set(p, "spo2", flat(97.0, 2.5, 1, 0.02));
  set(p, "end_tidal_co2", flat(35.0, 6.0, 1, 0.6));
  set(p, "bicarb_(hco3)", flat(24.0, 4.0, 12, 0.05));
  set(p, "blood_urea_nitrogen_(bun)", lognormal(18.0, 23.0, 0.673, 0.718, 12, 0.05));
  set(p, "chloride", flat(104.0, 5.0, 12, 0.05));
  set(p, "creatinine", lognormal(1.0, 1.1, 0.764, 0.808, 12, 0.05));
  set(p, "glucose", flat(7.5, 2.5, 6, 0.05));
  set(p, "magnesium", flat(2.0, 0.3, 24, 0.1));
  set(p, "osmolarity", flat(295.0, 12.0, 24, 0.8));
  set(p, "phosphorus", flat(3.5, 1.0, 24, 0.2));
  set(p, "potassium", flat(4.1, 0.5, 12, 0.05));
  set(p, "sodium", flat(139.0, 4.0, 12, 0.05));
  set(p, "hemoglobin", normal(11.7, 7.8, 2.09, 2.02, 6, 0.02));
  set(p, "met_hgb", normal(0.3, 0.5, 0.255, 0.332, 12, 0.5));
  set(p, "platelets", normal(217.0, 179.0, 95.9, 132.4, 12, 0.03));
  set(p, "white_blood_cell_count", flat(10.0, 4.0, 12, 0.03));
  set(p, "carboxy_hgb", flat(1.2, 0.6, 12, 0.5));
  set(p, "alanine_aminotransferase_(alt)", flat_log(30.0, 0.8, 24, 0.4));
  set(p, "albumin", normal(3.6, 3.0, 0.638, 0.663, 24, 0.35));
  set(p, "alkaline_phosphatase", flat_log(90.0, 0.5, 24, 0.4));
  set(p, "bilirubin_direct", flat_log(0.3, 0.8, 24, 0.7));
  set(p, "bilirubin_total", flat_log(0.7, 0.7, 24, 0.4));
  set(p, "inr", flat_log(1.2, 0.2, 12, 0.2));
  set(p, "lactic_acid", lognormal(1.5, 1.5, 0.596, 0.691, 12, 0.4));
  set(p, "partial_prothrombin_time_(ptt)", lognormal(30.9, 31.9, 0.419, 0.389, 12, 0.3));
  set(p, "protein", flat(6.2, 0.9, 24, 0.5));
  set(p, "lipase", lognormal(25.0, 27.0, 1.308, 1.242, 24, 0.7));
  set(p, "b-type_natriuretic_peptide_(bnp)", flat_log(300.0, 1.2, 24, 0.8));
  set(p, "troponin", flat_log(0.05, 1.3, 24, 0.7));
  set(p, "fio2", flat(0.4, 0.15, 4, 0.3));
  set(p, "partial_pressure_of_carbon_dioxide_(paco2)", flat(40.0, 8.0, 12, 0.5));
  set(p, "partial_pressure_of_oxygen_(pao2)", flat(95.0, 30.0, 12, 0.5));
  set(p, "ph", flat(7.38, 0.07, 12, 0.5));
  set(p, "saturation_of_oxygen_(sao2)", flat(96.0, 3.0, 12, 0.5));
  set(p, "hemoglobin_a1c", flat(6.0, 1.2, 24, 0.85));
  set(p, "best_map", flat(80.0, 12.0, 1, 0.02));
  set(p, "pf_sp", normal(250.0, 247.8, 97.1, 96.7, 4, 0.1));
  set(p, "pf_pa", flat(250.0, 100.0, 12, 0.5));
  return p;
}

FeatureProfiles planted_signal_profiles() {
  FeatureProfiles p = default_feature_profiles();
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    if (f == kHemoglobin || f == kPlatelets) continue;
    p[f].median_positive = p[f].median_negative;
    p[f].spread_positive = p[f].spread_negative;
  }
  p[kHemoglobin] = normal(11.7, 7.8, 1.5, 1.5, 6, 0.02);
  p[kPlatelets] = normal(240.0, 120.0, 60.0, 60.0, 12, 0.03);
  return p;
}

void SyntheticCohortSpec::validate() const {
  if (n_encounters_per_year < 1) throw ValidationError("n_encounters_per_year must be >= 1");
  if (first_year < kFirstYear || last_year > kLastYear || first_year > last_year) {
    throw ValidationError("synthetic years must lie within 2016..2020");
  }
  if (!(transfused_fraction > 0.0 && transfused_fraction < 1.0)) {
    throw ValidationError("transfused_fraction must lie in (0, 1)");
  }
  if (!(mtp_fraction >= 0.0 && mtp_fraction < 1.0)) throw ValidationError("mtp_fraction must lie in [0, 1)");
  if (!(mean_extra_transfusions >= 0.0)) throw ValidationError("mean_extra_transfusions must be >= 0");
  if (!(walk_fraction >= 0.0)) throw ValidationError("walk_fraction must be >= 0");
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    const auto& p = features[f];
    const std::string name(kFeatures[f].name);
    if (!(p.missing_rate >= 0.0 && p.missing_rate < 0.9)) {
      throw ValidationError("missing rate for " + name + " must lie in [0, 0.9)");
    }
    if (!(p.spread_negative > 0.0 && p.spread_positive > 0.0)) {
      throw ValidationError("spread for " + name + " must be positive");
    }
    if (p.log_normal && !(p.median_negative > 0.0 && p.median_positive > 0.0)) {
      throw ValidationError("log-normal median for " + name + " must be positive");
    }
    if (p.sampling_hours < 1) throw ValidationError("sampling interval for " + name + " must be >= 1 hour");
  }
}

RawTables generate_synthetic_cohort(const SyntheticCohortSpec& spec) {
  spec.validate();
  using std::chrono::hours;
  using std::chrono::minutes;

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::poisson_distribution<int> extra(spec.mean_extra_transfusions);
  std::exponential_distribution<double> gap(1.0 / 20.0);

  RawTables t;
  const int n_years = spec.last_year - spec.first_year + 1;
  t.encounters.reserve(static_cast<std::size_t>(spec.n_encounters_per_year) * n_years);

  constexpr double phi = 0.8;
  std::vector<RawObservation> scratch;
  std::vector<bool> needed;

  for (int year = spec.first_year; year <= spec.last_year; ++year) {
    const Timestamp start = year_start(year);
    for (int i = 0; i < spec.n_encounters_per_year; ++i) {
      Kind kind = Kind::Negative;
      const double u = unit(rng);
      if (u < spec.mtp_fraction) {
        kind = Kind::Massive;
      } else if (unit(rng) < spec.transfused_fraction) {
        kind = Kind::Transfused;
      }
      const int cls = kind == Kind::Negative ? 0 : 1;

      EncounterStatic enc;
      char id[32];
      std::snprintf(id, sizeof id, "E%d-%06d", year, i + 1);
      enc.encounter_id = id;
      enc.age = static_cast<int>(std::lround(std::clamp(kAgeMedian[cls] + 17.0 * gauss(rng), 18.0, 90.0)));
      enc.gender = static_cast<Gender>(draw(rng, kGenderShares[cls]));
      enc.race = static_cast<Race>(draw(rng, kRaceShares[cls]));
      enc.ethnicity = static_cast<Ethnicity>(draw(rng, kEthnicityShares[cls]));
      enc.hospital_service = static_cast<HospitalService>(draw(rng, kServiceShares[cls]));
      enc.admission_time = start + hours(static_cast<int>(unit(rng) * 364 * 24));
      enc.year = year;
      enc.mortality = unit(rng) < kMortality[cls];

      const auto enc_index = static_cast<std::uint32_t>(t.encounters.size());
      // Event offsets from admission, in minutes.
      std::vector<long> event_minutes;
      if (kind == Kind::Transfused) {
        double m = (4.0 + 44.0 * unit(rng)) * 60.0;
        const int n_events = 1 + extra(rng);
        for (int k = 0; k < n_events; ++k) {
          event_minutes.push_back(std::lround(m));
          m += (3.0 + gap(rng)) * 60.0;
        }
      } else if (kind == Kind::Massive) {
        const double m = (4.0 + 44.0 * unit(rng)) * 60.0;
        const int n_events = 4 + static_cast<int>(unit(rng) * 3.0);
        for (int k = 0; k < n_events; ++k) event_minutes.push_back(std::lround(m + 45.0 * k));
      }
      for (const long m : event_minutes) {
        t.transfusions.push_back({enc.admission_time + minutes(m), enc_index,
                                  static_cast<BloodProduct>(draw(rng, kProductShares))});
      }

      // Hours (since admission) that fall in some processing window.
      int last_hour = 24;
      if (!event_minutes.empty()) last_hour = static_cast<int>(event_minutes.back() / 60);
      needed.assign(static_cast<std::size_t>(last_hour) + 1, event_minutes.empty());
      for (const long m : event_minutes) {
        for (int h = 0; h <= last_hour; ++h) {
          const long hm = 60L * h;
          if (hm > m - 24 * 60 && hm <= m) needed[static_cast<std::size_t>(h)] = true;
        }
      }

      scratch.clear();
      for (std::size_t f = 0; f < kFeatureCount; ++f) {
        const auto& p = spec.features[f];
        // Draw every stochastic quantity before branching so the stream stays
        // aligned across features regardless of missingness.
        const bool present = unit(rng) >= p.missing_rate;
        const double z = gauss(rng);
        const int offset = static_cast<int>(unit(rng) * p.sampling_hours);
        const double loc = cls ? p.median_positive : p.median_negative;
        const double spread = cls ? p.spread_positive : p.spread_negative;
        const double center = p.log_normal ? std::log(loc) + spread * z : loc + spread * z;
        const double step_sd = spec.walk_fraction * spread * std::sqrt(1.0 - phi * phi);
        double level = center + spec.walk_fraction * spread * gauss(rng);
        for (int h = 0; h <= last_hour; ++h) {
          if (h > 0) level = center + phi * (level - center) + step_sd * gauss(rng);
          if (!present || !needed[static_cast<std::size_t>(h)] || (h + offset) % p.sampling_hours != 0) continue;
          const double value = p.log_normal ? std::exp(level) : std::max(level, 0.0);
          scratch.push_back({enc.admission_time + hours(h), value, enc_index, static_cast<std::uint16_t>(f)});
        }
      }
      std::stable_sort(scratch.begin(), scratch.end(),
                       [](const RawObservation& a, const RawObservation& b) { return a.time < b.time; });
      t.observations.insert(t.observations.end(), scratch.begin(), scratch.end());
      t.encounters.push_back(std::move(enc));
    }
  }
  return t;
}

}  // namespace transfuse
