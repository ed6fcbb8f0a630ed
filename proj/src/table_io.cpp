#include "transfuse/table_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "transfuse/errors.hpp"

namespace transfuse {

namespace fs = std::filesystem;

std::string format_timestamp(Timestamp t) {
  const auto days = std::chrono::floor<std::chrono::days>(t);
  const std::chrono::year_month_day ymd{days};
  const std::chrono::hh_mm_ss hms{t - days};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ldZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                static_cast<long>(hms.seconds().count()));
  return buf;
}

Timestamp parse_timestamp(std::string_view s) {
  int y = 0;
  unsigned mo = 0, d = 0, h = 0, mi = 0, se = 0;
  char tail = 0;
  const std::string str(s);
  const int n = std::sscanf(str.c_str(), "%4d-%2u-%2uT%2u:%2u:%2u%c", &y, &mo, &d, &h, &mi, &se, &tail);
  const bool ok_tail = n == 6 || (n == 7 && tail == 'Z' && str.size() == 20);
  if (!ok_tail || str.size() < 19) throw ValidationError("malformed timestamp '" + str + "'");
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{mo}, std::chrono::day{d}};
  if (!ymd.ok() || h > 23 || mi > 59 || se > 59) throw ValidationError("invalid timestamp '" + str + "'");
  return std::chrono::sys_days{ymd} + std::chrono::hours{h} + std::chrono::minutes{mi} + std::chrono::seconds{se};
}

std::vector<std::string> split_csv_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) throw ValidationError("unterminated quoted field");
  fields.push_back(std::move(cur));
  return fields;
}

namespace {

std::string quote_if_needed(std::string_view s) {
  if (s.find_first_of(",\"") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

// Shortest decimal that round-trips.
std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw ValidationError("malformed number '" + std::string(s) + "'");
  }
  return v;
}

int parse_int(std::string_view s) {
  int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw ValidationError("malformed integer '" + std::string(s) + "'");
  }
  return v;
}

// Iterates data rows of a CSV file with a required header.
class CsvReader {
 public:
  CsvReader(const fs::path& path, const std::vector<std::string_view>& header) : path_(path), in_(path) {
    if (!in_) throw ValidationError("cannot open " + path.string());
    std::string line;
    width_ = header.size();
    if (!std::getline(in_, line)) return;  // an empty file has no rows
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size() || !std::equal(fields.begin(), fields.end(), header.begin())) {
      throw ValidationError(path.string() + ":1: unexpected header");
    }
  }

  bool next(std::vector<std::string>& fields) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (line.empty() || line == "\r") continue;
      try {
        fields = split_csv_line(line);
      } catch (const ValidationError& e) {
        fail(e.what());
      }
      if (fields.size() != width_) fail("expected " + std::to_string(width_) + " fields");
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& msg) const { throw ValidationError(where() + ": " + msg); }
  std::string where() const { return path_.string() + ":" + std::to_string(line_no_ + 1); }

  template <typename Fn>
  auto guarded(Fn&& fn) const {
    try {
      return fn();
    } catch (const SchemaError& e) {
      throw SchemaError(where() + ": " + e.what());
    } catch (const ReferentialError& e) {
      throw ReferentialError(where() + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(where() + ": " + e.what());
    }
  }

 private:
  fs::path path_;
  std::ifstream in_;
  std::size_t width_ = 0;
  std::size_t line_no_ = 0;
};

constexpr std::string_view kEncounterHeader =
    "encounter_id,age,gender,race,ethnicity,hospital_service,admission_time,year,mortality";

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

}  // namespace

void write_encounters(std::ostream& out, const std::vector<EncounterStatic>& encounters) {
  out << kEncounterHeader << '\n';
  for (const auto& e : encounters) {
    out << quote_if_needed(e.encounter_id) << ',' << e.age << ',' << to_string(e.gender) << ','
        << to_string(e.race) << ',' << to_string(e.ethnicity) << ',' << to_string(e.hospital_service) << ','
        << format_timestamp(e.admission_time) << ',' << e.year << ',' << (e.mortality ? 1 : 0) << '\n';
  }
}

void write_observations(std::ostream& out, const RawTables& tables) {
  out << "encounter_id,time,variable,value\n";
  for (const auto& o : tables.observations) {
    out << quote_if_needed(tables.encounters[o.encounter].encounter_id) << ',' << format_timestamp(o.time) << ','
        << kFeatures[o.variable].name << ',' << format_double(o.value) << '\n';
  }
}

void write_transfusions(std::ostream& out, const RawTables& tables) {
  out << "encounter_id,time,product\n";
  for (const auto& t : tables.transfusions) {
    out << quote_if_needed(tables.encounters[t.encounter].encounter_id) << ',' << format_timestamp(t.time) << ','
        << to_string(t.product) << '\n';
  }
}

void write_tables(const fs::path& dir, const RawTables& tables) {
  fs::create_directories(dir);
  {
    auto out = open_out(dir / "encounters.csv");
    write_encounters(out, tables.encounters);
  }
  {
    auto out = open_out(dir / "observations.csv");
    write_observations(out, tables);
  }
  {
    auto out = open_out(dir / "transfusions.csv");
    write_transfusions(out, tables);
  }
}

RawTables ingest_tables(const fs::path& static_path, const fs::path& obs_path, const fs::path& txn_path) {
  RawTables t;
  std::unordered_map<std::string, std::uint32_t> ids;
  std::vector<std::string> f;
  {
    CsvReader reader(static_path, {"encounter_id", "age", "gender", "race", "ethnicity", "hospital_service",
                                   "admission_time", "year", "mortality"});
    while (reader.next(f)) {
      EncounterStatic e = reader.guarded([&] {
        EncounterStatic e;
        e.encounter_id = f[0];
        if (e.encounter_id.empty()) throw ValidationError("empty encounter_id");
        e.age = parse_int(f[1]);
        if (e.age < 18) throw ValidationError("age " + f[1] + " below 18");
        e.gender = parse_gender(f[2]);
        e.race = parse_race(f[3]);
        e.ethnicity = parse_ethnicity(f[4]);
        e.hospital_service = parse_hospital_service(f[5]);
        e.admission_time = parse_timestamp(f[6]);
        e.year = parse_int(f[7]);
        if (e.year < kFirstYear || e.year > kLastYear) throw ValidationError("year " + f[7] + " outside 2016..2020");
        if (f[8] != "0" && f[8] != "1") throw ValidationError("mortality must be 0 or 1");
        e.mortality = f[8] == "1";
        return e;
      });
      if (!ids.emplace(e.encounter_id, static_cast<std::uint32_t>(t.encounters.size())).second) {
        reader.fail("duplicate encounter_id " + e.encounter_id);
      }
      t.encounters.push_back(std::move(e));
    }
  }
  auto lookup = [&](const std::string& id) {
    const auto it = ids.find(id);
    if (it == ids.end()) throw ReferentialError("unknown encounter " + id);
    return it->second;
  };
  {
    CsvReader reader(obs_path, {"encounter_id", "time", "variable", "value"});
    while (reader.next(f)) {
      t.observations.push_back(reader.guarded([&] {
        RawObservation o;
        o.encounter = lookup(f[0]);
        o.time = parse_timestamp(f[1]);
        const auto var = feature_index(f[2]);
        if (!var) throw SchemaError("unknown variable '" + f[2] + "'");
        o.variable = static_cast<std::uint16_t>(*var);
        o.value = parse_double(f[3]);
        if (!std::isfinite(o.value)) throw ValidationError("non-finite value");
        if (o.time < t.encounters[o.encounter].admission_time) {
          throw ReferentialError("observation before admission for encounter " + f[0]);
        }
        return o;
      }));
    }
  }
  {
    CsvReader reader(txn_path, {"encounter_id", "time", "product"});
    while (reader.next(f)) {
      t.transfusions.push_back(reader.guarded([&] {
        TransfusionEvent e;
        e.encounter = lookup(f[0]);
        e.time = parse_timestamp(f[1]);
        e.product = parse_blood_product(f[2]);
        return e;
      }));
    }
  }
  return t;
}

void write_exclusions(std::ostream& out, const RawTables& tables, const ExclusionResult& exclusions) {
  out << "encounter_id,reason\n";
  for (const auto& e : exclusions.log) {
    out << quote_if_needed(tables.encounters[e.encounter].encounter_id) << ',' << to_string(e.reason) << '\n';
  }
}

void write_instances(std::ostream& out, const std::vector<CohortInstance>& instances) {
  out << "encounter_id,event_index,year,label";
  for (const auto& f : kFeatures) out << ',' << f.name;
  out << '\n';
  for (const auto& inst : instances) {
    out << quote_if_needed(inst.encounter_id) << ',' << inst.event_index << ',' << inst.year << ',' << inst.label;
    for (const double v : inst.features) {
      out << ',';
      if (!is_missing(v)) out << format_double(v);
    }
    out << '\n';
  }
}

std::vector<CohortInstance> read_instances(const fs::path& path) {
  std::vector<std::string_view> header{"encounter_id", "event_index", "year", "label"};
  for (const auto& f : kFeatures) header.push_back(f.name);
  CsvReader reader(path, header);
  std::vector<CohortInstance> out;
  std::vector<std::string> f;
  while (reader.next(f)) {
    out.push_back(reader.guarded([&] {
      CohortInstance inst;
      inst.encounter_id = f[0];
      inst.event_index = parse_int(f[1]);
      inst.year = parse_int(f[2]);
      inst.label = parse_int(f[3]);
      if (inst.label != 0 && inst.label != 1) throw ValidationError("label must be 0 or 1");
      bool any = false;
      for (std::size_t i = 0; i < kFeatureCount; ++i) {
        const auto& cell = f[4 + i];
        inst.features[i] = cell.empty() ? kMissing : parse_double(cell);
        any = any || !cell.empty();
      }
      if (!any) throw ValidationError("instance with every feature missing");
      return inst;
    }));
  }
  return out;
}

void write_cohort_summary(std::ostream& out, const CohortSummary& s) {
  auto num = [](double v) { return is_missing(v) ? std::string() : format_double(v); };
  auto pct = [](std::size_t k, std::size_t n) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(1) << (n ? 100.0 * static_cast<double>(k) / static_cast<double>(n) : 0.0);
    return os.str();
  };
  out << "characteristic,level,total,non_transfused,transfused,p_value\n";
  out << "encounters,," << s.n_encounters << ',' << s.n_non_transfused << ',' << s.n_transfused << ",\n";
  for (const auto& c : s.categorical) {
    for (std::size_t l = 0; l < c.levels.size(); ++l) {
      const auto [neg, pos] = c.counts[l];
      out << c.name << ',' << c.levels[l] << ',' << neg + pos << " (" << pct(neg + pos, s.n_encounters) << ")"
          << ',' << neg << " (" << pct(neg, s.n_non_transfused) << ")" << ',' << pos << " ("
          << pct(pos, s.n_transfused) << ")" << ',' << (l == 0 ? num(c.p_value) : std::string()) << '\n';
    }
  }
  auto cell = [&](const IntervalStat& st) {
    if (st.count == 0) return std::string();
    std::ostringstream os;
    os << std::setprecision(4) << st.median << " [" << st.low << "; " << st.high << "]";
    return os.str();
  };
  for (const auto& c : s.continuous) {
    out << c.name << ",median [2.5%; 97.5%]," << cell(c.total) << ',' << cell(c.non_transfused) << ','
        << cell(c.transfused) << ',' << num(c.p_value) << '\n';
  }
  out << "hemoglobin_label_pearson_r,," << num(s.hemoglobin_label_r) << ",,,\n";
}

}  // namespace transfuse
