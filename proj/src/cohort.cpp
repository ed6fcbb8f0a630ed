#include "transfuse/cohort.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <span>

#include <Eigen/Dense>

#include "transfuse/errors.hpp"
#include "transfuse/stats.hpp"

namespace transfuse {

namespace {

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view s, const std::array<std::string_view, N>& names, std::string_view what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return static_cast<Enum>(i);
  }
  throw ValidationError("unknown " + std::string(what) + " code '" + std::string(s) + "'");
}

constexpr std::array<std::string_view, 2> kGenderNames{"female", "male"};
constexpr std::array<std::string_view, 3> kRaceNames{"black", "white", "other"};
constexpr std::array<std::string_view, 3> kEthnicityNames{"hispanic", "non_hispanic", "other"};
constexpr std::array<std::string_view, 10> kServiceNames{
    "medicine",     "obgyn",            "cardiovascular", "orthopedics", "general_surgery",
    "neurosurgery", "thoracic_surgery", "oncology",       "urology",     "other"};
constexpr std::array<std::string_view, 4> kProductNames{"RBC", "platelets", "plasma", "whole_blood"};

// Observation indices grouped by encounter (counting sort, stable in time).
struct ObservationIndex {
  std::vector<std::size_t> offsets;
  std::vector<std::size_t> order;

  ObservationIndex(const RawTables& t) : offsets(t.encounters.size() + 1, 0), order(t.observations.size()) {
    for (const auto& o : t.observations) ++offsets[o.encounter + 1];
    for (std::size_t e = 0; e < t.encounters.size(); ++e) offsets[e + 1] += offsets[e];
    std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
    for (std::size_t i = 0; i < t.observations.size(); ++i) order[cursor[t.observations[i].encounter]++] = i;
  }

  std::span<const std::size_t> of(std::size_t encounter) const {
    return {order.data() + offsets[encounter], offsets[encounter + 1] - offsets[encounter]};
  }
};

std::vector<std::vector<Timestamp>> transfusion_times(const RawTables& t) {
  std::vector<std::vector<Timestamp>> times(t.encounters.size());
  for (const auto& tx : t.transfusions) times[tx.encounter].push_back(tx.time);
  for (auto& v : times) std::sort(v.begin(), v.end());
  return times;
}

// Window bounds; `open_start` excludes the lower bound.
struct Window {
  Timestamp start;
  Timestamp end;
  bool open_start;

  bool contains(Timestamp t) const { return (open_start ? t > start : t >= start) && t <= end; }
};

std::vector<Window> processing_windows(const EncounterStatic& enc, const std::vector<Timestamp>& events) {
  std::vector<Window> windows;
  if (events.empty()) {
    windows.push_back({enc.admission_time, enc.admission_time + kAggregationWindow, false});
  } else {
    for (const auto t : events) windows.push_back({t - kAggregationWindow, t, true});
  }
  return windows;
}

}  // namespace

std::string_view to_string(Gender v) { return kGenderNames[static_cast<std::size_t>(v)]; }
std::string_view to_string(Race v) { return kRaceNames[static_cast<std::size_t>(v)]; }
std::string_view to_string(Ethnicity v) { return kEthnicityNames[static_cast<std::size_t>(v)]; }
std::string_view to_string(HospitalService v) { return kServiceNames[static_cast<std::size_t>(v)]; }
std::string_view to_string(BloodProduct v) { return kProductNames[static_cast<std::size_t>(v)]; }

Gender parse_gender(std::string_view s) { return parse_enum<Gender>(s, kGenderNames, "gender"); }
Race parse_race(std::string_view s) { return parse_enum<Race>(s, kRaceNames, "race"); }
Ethnicity parse_ethnicity(std::string_view s) { return parse_enum<Ethnicity>(s, kEthnicityNames, "ethnicity"); }
HospitalService parse_hospital_service(std::string_view s) {
  return parse_enum<HospitalService>(s, kServiceNames, "hospital_service");
}
BloodProduct parse_blood_product(std::string_view s) {
  return parse_enum<BloodProduct>(s, kProductNames, "blood product");
}

std::string_view to_string(ExclusionReason r) {
  switch (r) {
    case ExclusionReason::MassiveTransfusion:
      return "massive_transfusion";
    case ExclusionReason::NoObservations:
      return "no_observations";
  }
  return "unknown";
}

std::size_t ExclusionResult::retained_count() const {
  return static_cast<std::size_t>(std::count(retained.begin(), retained.end(), true));
}

bool exceeds_transfusion_rate(std::vector<Timestamp> times, std::chrono::seconds window, int max_events) {
  std::sort(times.begin(), times.end());
  // Two-pointer sweep over windows [times[i], times[i] + window].
  std::size_t hi = 0;
  for (std::size_t lo = 0; lo < times.size(); ++lo) {
    if (hi < lo) hi = lo;
    while (hi < times.size() && times[hi] <= times[lo] + window) ++hi;
    if (static_cast<int>(hi - lo) > max_events) return true;
  }
  return false;
}

ExclusionResult apply_exclusions(const RawTables& tables) {
  const auto events = transfusion_times(tables);
  const ObservationIndex index(tables);
  ExclusionResult result;
  result.retained.assign(tables.encounters.size(), true);

  for (std::size_t e = 0; e < tables.encounters.size(); ++e) {
    const auto enc_id = static_cast<std::uint32_t>(e);
    if (exceeds_transfusion_rate(events[e])) {
      result.retained[e] = false;
      result.log.push_back({enc_id, ExclusionReason::MassiveTransfusion});
      continue;
    }
    const auto windows = processing_windows(tables.encounters[e], events[e]);
    bool any = false;
    for (const std::size_t oi : index.of(e)) {
      const Timestamp t = tables.observations[oi].time;
      if (std::any_of(windows.begin(), windows.end(), [t](const Window& w) { return w.contains(t); })) {
        any = true;
        break;
      }
    }
    if (!any) {
      result.retained[e] = false;
      result.log.push_back({enc_id, ExclusionReason::NoObservations});
    }
  }
  return result;
}

std::vector<CohortInstance> build_instances(const RawTables& tables, const ExclusionResult& exclusions) {
  if (exclusions.retained.size() != tables.encounters.size()) {
    throw ValidationError("exclusion result does not match encounter table");
  }
  const auto events = transfusion_times(tables);
  const ObservationIndex index(tables);
  std::vector<CohortInstance> instances;
  std::array<std::vector<double>, kFeatureCount> buckets;

  for (std::size_t e = 0; e < tables.encounters.size(); ++e) {
    if (!exclusions.retained[e]) continue;
    const auto& enc = tables.encounters[e];
    const auto windows = processing_windows(enc, events[e]);
    const auto obs = index.of(e);
    for (std::size_t w = 0; w < windows.size(); ++w) {
      for (auto& b : buckets) b.clear();
      for (const std::size_t oi : obs) {
        const auto& o = tables.observations[oi];
        if (windows[w].contains(o.time)) buckets[o.variable].push_back(o.value);
      }
      CohortInstance inst;
      inst.encounter_id = enc.encounter_id;
      inst.year = enc.year;
      inst.label = events[e].empty() ? 0 : 1;
      inst.event_index = events[e].empty() ? 0 : static_cast<int>(w) + 1;
      bool any = false;
      for (std::size_t f = 0; f < kFeatureCount; ++f) {
        if (buckets[f].empty()) {
          inst.features[f] = kMissing;
        } else {
          inst.features[f] = stats::median(buckets[f]);
          any = true;
        }
      }
      if (any) instances.push_back(std::move(inst));
    }
  }
  return instances;
}

namespace {

IntervalStat interval(std::vector<double> v) {
  IntervalStat s;
  s.count = v.size();
  if (v.empty()) return s;
  s.median = stats::median(v);
  s.low = stats::quantile(v, 0.025);
  s.high = stats::quantile(v, 0.975);
  return s;
}

ContinuousSummary summarize_continuous(std::string name, std::vector<double> neg, std::vector<double> pos) {
  ContinuousSummary s;
  s.name = std::move(name);
  std::vector<double> all = neg;
  all.insert(all.end(), pos.begin(), pos.end());
  s.total = interval(all);
  if (!neg.empty() && !pos.empty()) s.p_value = stats::kruskal_wallis({neg, pos}).p_value;
  s.non_transfused = interval(std::move(neg));
  s.transfused = interval(std::move(pos));
  return s;
}

template <typename Enum>
CategoricalSummary summarize_categorical(std::string name, std::size_t n_levels, const std::vector<Enum>& values,
                                         const std::vector<int>& labels, auto level_name) {
  CategoricalSummary s;
  s.name = std::move(name);
  s.counts.assign(n_levels, {0, 0});
  for (std::size_t l = 0; l < n_levels; ++l) s.levels.emplace_back(level_name(static_cast<Enum>(l)));
  for (std::size_t i = 0; i < values.size(); ++i) {
    ++s.counts[static_cast<std::size_t>(values[i])][labels[i]];
  }
  Eigen::MatrixXd table(static_cast<Eigen::Index>(n_levels), 2);
  for (std::size_t l = 0; l < n_levels; ++l) {
    table(static_cast<Eigen::Index>(l), 0) = static_cast<double>(s.counts[l][0]);
    table(static_cast<Eigen::Index>(l), 1) = static_cast<double>(s.counts[l][1]);
  }
  try {
    s.p_value = stats::chi_square_independence(table).p_value;
  } catch (const ValidationError&) {
    s.p_value = kMissing;  // a single observed level
  }
  return s;
}

}  // namespace

CohortSummary cohort_summary(const std::vector<EncounterStatic>& encounters,
                             const std::vector<CohortInstance>& instances) {
  std::map<std::string_view, const EncounterStatic*> by_id;
  for (const auto& e : encounters) by_id.emplace(e.encounter_id, &e);

  std::vector<const CohortInstance*> index_rows;
  std::set<std::string_view> seen;
  for (const auto& inst : instances) {
    if (inst.event_index > 1) continue;
    if (!seen.insert(inst.encounter_id).second) continue;
    index_rows.push_back(&inst);
  }
  std::sort(index_rows.begin(), index_rows.end(),
            [](const CohortInstance* a, const CohortInstance* b) { return a->encounter_id < b->encounter_id; });

  CohortSummary out;
  std::vector<int> labels;
  std::vector<const EncounterStatic*> statics;
  for (const auto* inst : index_rows) {
    const auto it = by_id.find(inst->encounter_id);
    if (it == by_id.end()) throw ReferentialError("instance references unknown encounter " + inst->encounter_id);
    statics.push_back(it->second);
    labels.push_back(inst->label);
  }
  out.n_encounters = labels.size();
  out.n_transfused = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  out.n_non_transfused = out.n_encounters - out.n_transfused;
  if (out.n_transfused == 0 || out.n_non_transfused == 0) {
    throw ValidationError("cohort summary requires both transfused and non-transfused encounters");
  }

  auto collect = [&](auto field) {
    std::vector<decltype(field(*statics[0]))> v;
    for (const auto* s : statics) v.push_back(field(*s));
    return v;
  };
  out.categorical.push_back(summarize_categorical<Gender>(
      "gender", kGenderNames.size(), collect([](const EncounterStatic& s) { return s.gender; }), labels,
      [](Gender g) { return to_string(g); }));
  out.categorical.push_back(summarize_categorical<Race>(
      "race", kRaceNames.size(), collect([](const EncounterStatic& s) { return s.race; }), labels,
      [](Race r) { return to_string(r); }));
  out.categorical.push_back(summarize_categorical<Ethnicity>(
      "ethnicity", kEthnicityNames.size(), collect([](const EncounterStatic& s) { return s.ethnicity; }), labels,
      [](Ethnicity r) { return to_string(r); }));
  out.categorical.push_back(summarize_categorical<HospitalService>(
      "hospital_service", kServiceNames.size(),
      collect([](const EncounterStatic& s) { return s.hospital_service; }), labels,
      [](HospitalService r) { return to_string(r); }));
  std::vector<std::uint8_t> mortality;
  for (const auto* s : statics) mortality.push_back(s->mortality ? 1 : 0);
  out.categorical.push_back(summarize_categorical<std::uint8_t>(
      "in_hospital_mortality", 2, mortality, labels,
      [](std::uint8_t m) { return std::string_view(m ? "yes" : "no"); }));

  {
    std::vector<double> neg, pos;
    for (std::size_t i = 0; i < statics.size(); ++i) (labels[i] ? pos : neg).push_back(statics[i]->age);
    out.continuous.push_back(summarize_continuous("age", std::move(neg), std::move(pos)));
  }
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    std::vector<double> neg, pos;
    for (std::size_t i = 0; i < index_rows.size(); ++i) {
      const double v = index_rows[i]->features[f];
      if (!is_missing(v)) (labels[i] ? pos : neg).push_back(v);
    }
    out.continuous.push_back(summarize_continuous(std::string(kFeatures[f].name), std::move(neg), std::move(pos)));
  }

  std::vector<double> hgb, lab;
  for (std::size_t i = 0; i < index_rows.size(); ++i) {
    const double v = index_rows[i]->features[kHemoglobin];
    if (is_missing(v)) continue;
    hgb.push_back(v);
    lab.push_back(labels[i]);
  }
  out.hemoglobin_pairs = hgb.size();
  if (hgb.size() >= 2) out.hemoglobin_label_r = stats::pearson(hgb, lab);
  return out;
}

}  // namespace transfuse
