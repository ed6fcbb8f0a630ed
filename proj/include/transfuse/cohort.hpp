#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "transfuse/schema.hpp"

namespace transfuse {

using Timestamp = std::chrono::sys_seconds;

enum class Gender : std::uint8_t { Female, Male };
enum class Race : std::uint8_t { Black, White, Other };
enum class Ethnicity : std::uint8_t { Hispanic, NonHispanic, Other };
enum class HospitalService : std::uint8_t {
  Medicine,
  Obgyn,
  Cardiovascular,
  Orthopedics,
  GeneralSurgery,
  Neurosurgery,
  ThoracicSurgery,
  Oncology,
  Urology,
  Other,
};
enum class BloodProduct : std::uint8_t { RBC, Platelets, Plasma, WholeBlood };

std::string_view to_string(Gender v);
std::string_view to_string(Race v);
std::string_view to_string(Ethnicity v);
std::string_view to_string(HospitalService v);
std::string_view to_string(BloodProduct v);

// Parsers throw ValidationError on unknown codes.
Gender parse_gender(std::string_view s);
Race parse_race(std::string_view s);
Ethnicity parse_ethnicity(std::string_view s);
HospitalService parse_hospital_service(std::string_view s);
BloodProduct parse_blood_product(std::string_view s);

inline constexpr int kFirstYear = 2016;
inline constexpr int kLastYear = 2020;

struct EncounterStatic {
  std::string encounter_id;
  int age = 0;
  Gender gender = Gender::Female;
  Race race = Race::Other;
  Ethnicity ethnicity = Ethnicity::Other;
  HospitalService hospital_service = HospitalService::Other;
  Timestamp admission_time{};
  int year = kFirstYear;
  bool mortality = false;
};

// `encounter` indexes RawTables::encounters.
struct RawObservation {
  Timestamp time{};
  double value = 0.0;
  std::uint32_t encounter = 0;
  std::uint16_t variable = 0;
};

struct TransfusionEvent {
  Timestamp time{};
  std::uint32_t encounter = 0;
  BloodProduct product = BloodProduct::RBC;
};

struct RawTables {
  std::vector<EncounterStatic> encounters;
  std::vector<RawObservation> observations;
  std::vector<TransfusionEvent> transfusions;
};

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return std::isnan(v); }

struct CohortInstance {
  std::string encounter_id;
  int event_index = 0;  // 0 for non-transfused, k for the k-th transfusion
  int year = kFirstYear;
  int label = 0;
  std::array<double, kFeatureCount> features{};
};

// ---- exclusions -----------------------------------------------------------

enum class ExclusionReason : std::uint8_t { MassiveTransfusion, NoObservations };
std::string_view to_string(ExclusionReason r);

struct Exclusion {
  std::uint32_t encounter = 0;
  ExclusionReason reason = ExclusionReason::MassiveTransfusion;
};

struct ExclusionResult {
  std::vector<bool> retained;  // per encounter
  std::vector<Exclusion> log;
  std::size_t retained_count() const;
};

inline constexpr std::chrono::hours kMtpWindow{6};
inline constexpr int kMtpMaxEvents = 3;
inline constexpr std::chrono::hours kAggregationWindow{24};

// True when more than `max_events` fall in some closed window [t, t + window]
// anchored at an event time. `times` need not be sorted.
bool exceeds_transfusion_rate(std::vector<Timestamp> times, std::chrono::seconds window = kMtpWindow,
                              int max_events = kMtpMaxEvents);

ExclusionResult apply_exclusions(const RawTables& tables);

// One positive instance per retained transfusion event, one negative per
// retained never-transfused encounter. All-missing instances are dropped.
std::vector<CohortInstance> build_instances(const RawTables& tables, const ExclusionResult& exclusions);

// ---- Table-1 style summary -----------------------------------------------

struct IntervalStat {
  double median = kMissing;
  double low = kMissing;   // 2.5% quantile
  double high = kMissing;  // 97.5% quantile
  std::size_t count = 0;
};

struct ContinuousSummary {
  std::string name;
  IntervalStat total;
  IntervalStat non_transfused;
  IntervalStat transfused;
  double p_value = kMissing;  // Kruskal-Wallis
};

struct CategoricalSummary {
  std::string name;
  std::vector<std::string> levels;
  std::vector<std::array<std::size_t, 2>> counts;  // {non-transfused, transfused}
  double p_value = kMissing;                       // chi-square
};

struct CohortSummary {
  std::size_t n_encounters = 0;
  std::size_t n_non_transfused = 0;
  std::size_t n_transfused = 0;
  std::vector<CategoricalSummary> categorical;
  std::vector<ContinuousSummary> continuous;
  double hemoglobin_label_r = kMissing;
  std::size_t hemoglobin_pairs = 0;
};

// Uses each transfused encounter's index transfusion only. Throws when the
// cohort lacks either class.
CohortSummary cohort_summary(const std::vector<EncounterStatic>& encounters,
                             const std::vector<CohortInstance>& instances);

}  // namespace transfuse
