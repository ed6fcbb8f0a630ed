#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "transfuse/cohort.hpp"
#include "transfuse/errors.hpp"
#include "transfuse/synthetic.hpp"
#include "transfuse/table_io.hpp"

#include "oracles.hpp"

using namespace transfuse;
using namespace std::chrono_literals;
namespace fs = std::filesystem;

namespace {

const Timestamp kT0 = std::chrono::sys_days{std::chrono::year{2018} / 3 / 1} + 8h;

std::vector<Timestamp> at_hours(std::initializer_list<double> hours) {
  std::vector<Timestamp> out;
  for (const double h : hours) out.push_back(kT0 + std::chrono::seconds(static_cast<long>(h * 3600)));
  return out;
}

EncounterStatic encounter(const std::string& id, Timestamp admit) {
  EncounterStatic e;
  e.encounter_id = id;
  e.age = 60;
  e.admission_time = admit;
  e.year = 2018;
  return e;
}

RawObservation obs(std::uint32_t enc, Timestamp t, std::size_t var, double v) {
  return {t, v, enc, static_cast<std::uint16_t>(var)};
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("transfuse_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

const char* kEncounterHeader = "encounter_id,age,gender,race,ethnicity,hospital_service,admission_time,year,mortality\n";

}  // namespace

TEST(MassiveTransfusion, FourWithinSixHoursIsExcluded) {
  EXPECT_TRUE(exceeds_transfusion_rate(at_hours({0, 1, 2, 3})));
}

TEST(MassiveTransfusion, SpreadEventsAreRetained) {
  EXPECT_FALSE(exceeds_transfusion_rate(at_hours({0, 4, 8, 12})));
}

TEST(MassiveTransfusion, ExactlyThreeIsRetained) {
  EXPECT_FALSE(exceeds_transfusion_rate(at_hours({0, 2, 5})));
  EXPECT_FALSE(exceeds_transfusion_rate(at_hours({0, 0, 0})));
}

TEST(MassiveTransfusion, WindowIsClosedAtSixHours) {
  EXPECT_TRUE(exceeds_transfusion_rate(at_hours({0, 2, 4, 6})));
  auto late = at_hours({0, 2, 4});
  late.push_back(kT0 + 6h + 1s);
  EXPECT_FALSE(exceeds_transfusion_rate(late));
}

TEST(MassiveTransfusion, UnsortedInputAndDuplicates) {
  EXPECT_TRUE(exceeds_transfusion_rate(at_hours({5, 1, 5, 3})));
  EXPECT_TRUE(exceeds_transfusion_rate(at_hours({2, 2, 2, 2})));
}

TEST(MassiveTransfusion, AgreesWithSlidingWindowOracle) {
  std::mt19937_64 rng(2024);
  int positives = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = std::uniform_int_distribution<int>(0, 9)(rng);
    const long span = std::uniform_int_distribution<long>(60, 72 * 60)(rng);
    std::vector<long> minutes;
    std::vector<Timestamp> times;
    for (int i = 0; i < k; ++i) {
      const long m = std::uniform_int_distribution<long>(0, span)(rng);
      minutes.push_back(m);
      times.push_back(kT0 + std::chrono::minutes(m));
    }
    const bool expected = oracle::sliding_window_exceeds(minutes);
    positives += expected;
    ASSERT_EQ(exceeds_transfusion_rate(times), expected) << "trial " << trial;
  }
  // Both outcomes are exercised.
  EXPECT_GT(positives, 100);
  EXPECT_LT(positives, 900);
}

TEST(Exclusions, LogsReasonPerEncounter) {
  RawTables t;
  t.encounters = {encounter("a", kT0), encounter("b", kT0), encounter("c", kT0)};
  for (const auto& h : at_hours({10, 11, 12, 13})) t.transfusions.push_back({h, 0, BloodProduct::RBC});
  t.observations.push_back(obs(0, kT0 + 9h, kHemoglobin, 8.0));
  t.transfusions.push_back({kT0 + 30h, 1, BloodProduct::Plasma});
  t.observations.push_back(obs(1, kT0 + 1h, kHemoglobin, 9.0));  // more than 24h before the event
  t.observations.push_back(obs(2, kT0 + 2h, kPlatelets, 200.0));
  const auto r = apply_exclusions(t);
  EXPECT_EQ(r.retained, (std::vector<bool>{false, false, true}));
  ASSERT_EQ(r.log.size(), 2u);
  EXPECT_EQ(r.log[0].reason, ExclusionReason::MassiveTransfusion);
  EXPECT_EQ(r.log[1].reason, ExclusionReason::NoObservations);
}

TEST(Instances, MedianOverWindow) {
  RawTables t;
  t.encounters = {encounter("n", kT0)};
  for (const double v : {100.0, 1.0, 2.0}) t.observations.push_back(obs(0, kT0 + 1h, kPlatelets, v));
  const auto inst = build_instances(t, apply_exclusions(t));
  ASSERT_EQ(inst.size(), 1u);
  EXPECT_EQ(inst[0].features[kPlatelets], 2.0);
  EXPECT_TRUE(is_missing(inst[0].features[kHemoglobin]));
  EXPECT_EQ(inst[0].label, 0);
  EXPECT_EQ(inst[0].event_index, 0);
}

TEST(Instances, PreTransfusionWindowIsHalfOpen) {
  RawTables t;
  t.encounters = {encounter("p", kT0)};
  const Timestamp ev = kT0 + 30h;
  t.transfusions.push_back({ev, 0, BloodProduct::RBC});
  t.observations.push_back(obs(0, ev - 24h, kHemoglobin, 5.0));  // excluded bound
  t.observations.push_back(obs(0, ev, kHemoglobin, 9.0));        // included bound
  t.observations.push_back(obs(0, ev - 24h, kPlatelets, 50.0));
  const auto inst = build_instances(t, apply_exclusions(t));
  ASSERT_EQ(inst.size(), 1u);
  EXPECT_EQ(inst[0].features[kHemoglobin], 9.0);
  EXPECT_TRUE(is_missing(inst[0].features[kPlatelets]));
  EXPECT_EQ(inst[0].label, 1);
}

TEST(Instances, NonTransfusedWindowIsClosed) {
  RawTables t;
  t.encounters = {encounter("n", kT0)};
  t.observations.push_back(obs(0, kT0, kHemoglobin, 11.0));
  t.observations.push_back(obs(0, kT0 + 24h, kPlatelets, 210.0));
  t.observations.push_back(obs(0, kT0 + 24h + 1s, kPlatelets, 999.0));
  const auto inst = build_instances(t, apply_exclusions(t));
  ASSERT_EQ(inst.size(), 1u);
  EXPECT_EQ(inst[0].features[kHemoglobin], 11.0);
  EXPECT_EQ(inst[0].features[kPlatelets], 210.0);
}

TEST(Instances, OnePositivePerTransfusionEvent) {
  RawTables t;
  t.encounters = {encounter("p", kT0)};
  for (const double h : {10.0, 30.0, 50.0}) {
    t.transfusions.push_back({kT0 + std::chrono::seconds(static_cast<long>(h * 3600)), 0, BloodProduct::RBC});
    t.observations.push_back(obs(0, kT0 + std::chrono::seconds(static_cast<long>((h - 1) * 3600)), kHemoglobin, h));
  }
  const auto inst = build_instances(t, apply_exclusions(t));
  ASSERT_EQ(inst.size(), 3u);
  for (int k = 0; k < 3; ++k) {
    EXPECT_EQ(inst[k].encounter_id, "p");
    EXPECT_EQ(inst[k].event_index, k + 1);
  }
  // Window (26h, 50h] holds the readings at 29h and 49h.
  EXPECT_EQ(inst[2].features[kHemoglobin], 40.0);
}

TEST(Instances, MedianIgnoresObservationOrder) {
  RawTables a, b;
  a.encounters = b.encounters = {encounter("n", kT0)};
  std::vector<RawObservation> o;
  for (int i = 0; i < 9; ++i) o.push_back(obs(0, kT0 + std::chrono::hours(i), kPlatelets, 100.0 + 7 * ((i * 5) % 9)));
  a.observations = o;
  std::reverse(o.begin(), o.end());
  b.observations = o;
  EXPECT_EQ(build_instances(a, apply_exclusions(a))[0].features[kPlatelets],
            build_instances(b, apply_exclusions(b))[0].features[kPlatelets]);
}

TEST(Synthetic, SameSeedGivesIdenticalBytes) {
  SyntheticCohortSpec spec;
  spec.n_encounters_per_year = 150;
  const fs::path a = temp_dir("synth_a"), b = temp_dir("synth_b");
  write_tables(a, generate_synthetic_cohort(spec));
  write_tables(b, generate_synthetic_cohort(spec));
  for (const char* f : {"encounters.csv", "observations.csv", "transfusions.csv"}) {
    std::ifstream fa(a / f), fb(b / f);
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    EXPECT_EQ(sa.str(), sb.str()) << f;
    EXPECT_GT(sa.str().size(), 100u);
  }
}

TEST(Synthetic, PrevalenceAndHemoglobinTargets) {
  SyntheticCohortSpec spec;
  spec.n_encounters_per_year = 10000;
  spec.first_year = spec.last_year = 2019;
  const RawTables t = generate_synthetic_cohort(spec);
  const auto ex = apply_exclusions(t);
  const auto inst = build_instances(t, ex);
  const auto s = cohort_summary(t.encounters, inst);
  const double prevalence = static_cast<double>(s.n_transfused) / static_cast<double>(s.n_encounters);
  EXPECT_NEAR(prevalence, 0.254, 0.02);
  const auto& hgb = s.continuous.at(1 + kHemoglobin);
  ASSERT_EQ(hgb.name, "hemoglobin");
  EXPECT_NEAR(hgb.transfused.median, 7.8, 0.3);
  EXPECT_NEAR(hgb.non_transfused.median, 11.7, 0.3);
  // Deliberate MTP encounters exist and are excluded.
  std::size_t mtp = 0;
  for (const auto& e : ex.log) mtp += e.reason == ExclusionReason::MassiveTransfusion;
  EXPECT_GT(mtp, 0u);
}

TEST(Synthetic, InstanceCountsMatchRetainedEvents) {
  SyntheticCohortSpec spec;
  spec.n_encounters_per_year = 300;
  const RawTables t = generate_synthetic_cohort(spec);
  const auto ex = apply_exclusions(t);
  const auto inst = build_instances(t, ex);
  std::vector<int> events(t.encounters.size(), 0);
  for (const auto& tx : t.transfusions) ++events[tx.encounter];
  std::size_t pos = 0, neg = 0;
  for (std::size_t e = 0; e < t.encounters.size(); ++e) {
    if (!ex.retained[e]) continue;
    (events[e] ? pos : neg) += events[e] ? static_cast<std::size_t>(events[e]) : 1;
  }
  std::size_t ipos = 0, ineg = 0;
  for (const auto& i : inst) (i.label ? ipos : ineg)++;
  // All-missing windows may drop a few instances.
  EXPECT_LE(ipos, pos);
  EXPECT_LE(ineg, neg);
  EXPECT_GE(ipos + ineg, (pos + neg) * 95 / 100);
}

TEST(Synthetic, RejectsOutOfRangeSpec) {
  SyntheticCohortSpec spec;
  spec.transfused_fraction = 1.5;
  EXPECT_THROW(spec.validate(), ValidationError);
}

TEST(Ingest, RoundTripsGeneratedTables) {
  SyntheticCohortSpec spec;
  spec.n_encounters_per_year = 40;
  const RawTables t = generate_synthetic_cohort(spec);
  const fs::path d = temp_dir("ingest_rt");
  write_tables(d, t);
  const RawTables back = ingest_tables(d / "encounters.csv", d / "observations.csv", d / "transfusions.csv");
  ASSERT_EQ(back.encounters.size(), t.encounters.size());
  ASSERT_EQ(back.observations.size(), t.observations.size());
  ASSERT_EQ(back.transfusions.size(), t.transfusions.size());
  const auto a = build_instances(t, apply_exclusions(t));
  const auto b = build_instances(back, apply_exclusions(back));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      if (is_missing(a[i].features[f])) {
        EXPECT_TRUE(is_missing(b[i].features[f]));
      } else {
        EXPECT_EQ(a[i].features[f], b[i].features[f]);
      }
    }
  }
}

TEST(Ingest, EmptyObservationFileKeepsEncounters) {
  const fs::path d = temp_dir("ingest_empty");
  write(d / "e.csv", std::string(kEncounterHeader) + "x1,50,male,white,non_hispanic,medicine,2017-01-01T00:00:00Z,2017,0\n");
  write(d / "o.csv", "encounter_id,time,variable,value\n");
  write(d / "t.csv", "encounter_id,time,product\n");
  const RawTables t = ingest_tables(d / "e.csv", d / "o.csv", d / "t.csv");
  EXPECT_EQ(t.encounters.size(), 1u);
  EXPECT_TRUE(t.observations.empty());
  const auto ex = apply_exclusions(t);
  EXPECT_EQ(ex.log.at(0).reason, ExclusionReason::NoObservations);
}

TEST(Ingest, SchemaAndReferentialErrors) {
  const fs::path d = temp_dir("ingest_err");
  write(d / "e.csv", std::string(kEncounterHeader) + "x1,50,male,white,non_hispanic,medicine,2017-01-01T00:00:00Z,2017,0\n");
  write(d / "t.csv", "encounter_id,time,product\n");

  write(d / "ok.csv", "encounter_id,time,variable,value\nx1,2017-01-01T03:00:00Z,hemoglobin,9.5\n");
  EXPECT_EQ(ingest_tables(d / "e.csv", d / "ok.csv", d / "t.csv").observations.size(), 1u);

  write(d / "bad_var.csv", "encounter_id,time,variable,value\nx1,2017-01-01T03:00:00Z,hgb,9.5\n");
  EXPECT_THROW(ingest_tables(d / "e.csv", d / "bad_var.csv", d / "t.csv"), SchemaError);

  write(d / "early.csv", "encounter_id,time,variable,value\nx1,2016-12-31T23:00:00Z,hemoglobin,9.5\n");
  try {
    ingest_tables(d / "e.csv", d / "early.csv", d / "t.csv");
    FAIL() << "expected a referential error";
  } catch (const ReferentialError& e) {
    EXPECT_NE(std::string(e.what()).find("x1"), std::string::npos);
  }

  write(d / "unknown.csv", "encounter_id,time,variable,value\nzz,2017-01-01T03:00:00Z,hemoglobin,9.5\n");
  EXPECT_THROW(ingest_tables(d / "e.csv", d / "unknown.csv", d / "t.csv"), ReferentialError);

  write(d / "short.csv", "encounter_id,time,variable,value\nx1,2017-01-01T03:00:00Z,hemoglobin,9.5\nx1,oops\n");
  try {
    ingest_tables(d / "e.csv", d / "short.csv", d / "t.csv");
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("short.csv"), std::string::npos) << msg;
    EXPECT_NE(msg.find(":3"), std::string::npos) << msg;
  }
}

TEST(Summary, RequiresBothClasses) {
  std::vector<EncounterStatic> enc{encounter("a", kT0)};
  CohortInstance i;
  i.encounter_id = "a";
  i.features.fill(kMissing);
  i.features[kHemoglobin] = 10;
  EXPECT_THROW(cohort_summary(enc, {i}), ValidationError);
}

TEST(Summary, HemoglobinCorrelationNearMinusOne) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> noise(0.0, 0.01);
  std::vector<EncounterStatic> enc;
  std::vector<CohortInstance> inst;
  for (int k = 0; k < 200; ++k) {
    enc.push_back(encounter("e" + std::to_string(k), kT0));
    CohortInstance i;
    i.encounter_id = enc.back().encounter_id;
    i.label = k % 3 == 0;
    i.event_index = i.label ? 1 : 0;
    i.features.fill(kMissing);
    i.features[kHemoglobin] = 12 - 4 * i.label + noise(rng);
    inst.push_back(i);
  }
  const auto s = cohort_summary(enc, inst);
  EXPECT_LT(s.hemoglobin_label_r, -0.99);
  EXPECT_EQ(s.hemoglobin_pairs, 200u);
  EXPECT_EQ(s.n_transfused, 67u);
}

TEST(Summary, UsesIndexTransfusionOnly) {
  std::vector<EncounterStatic> enc{encounter("a", kT0), encounter("b", kT0)};
  std::vector<CohortInstance> inst;
  for (int k = 1; k <= 3; ++k) {
    CohortInstance i;
    i.encounter_id = "a";
    i.label = 1;
    i.event_index = k;
    i.features.fill(kMissing);
    i.features[kHemoglobin] = 7.0 + k;
    inst.push_back(i);
  }
  CohortInstance n;
  n.encounter_id = "b";
  n.features.fill(kMissing);
  n.features[kHemoglobin] = 12;
  inst.push_back(n);
  const auto s = cohort_summary(enc, inst);
  EXPECT_EQ(s.n_transfused, 1u);
  EXPECT_EQ(s.continuous.at(1 + kHemoglobin).transfused.median, 8.0);
}
