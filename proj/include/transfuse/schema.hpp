#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace transfuse {

inline constexpr std::size_t kFeatureCount = 43;

struct FeatureInfo {
  std::string_view name;
  std::string_view unit;
};

// Routine vitals and labs, in canonical column order.
inline constexpr std::array<FeatureInfo, kFeatureCount> kFeatures{{
    {"temperature", "C"},
    {"sbp_cuff", "mmHg"},
    {"dbp_cuff", "mmHg"},
    {"pulse", "beats per minute"},
    {"unassisted_resp_rate", "breaths per minute"},
    {"spo2", "%"},
    {"end_tidal_co2", "mmHg"},
    {"bicarb_(hco3)", "mmol/L"},
    {"blood_urea_nitrogen_(bun)", "mg/dL"},
    {"chloride", "mEq/L"},
    {"creatinine", "mg/dL"},
    {"glucose", "mmol/L"},
    {"magnesium", "mg/dL"},
    {"osmolarity", "mOsm/kg"},
    {"phosphorus", "mg/dL"},
    {"potassium", "mEq/L"},
    {"sodium", "mEq/L"},
    {"hemoglobin", "g/dL"},
    {"met_hgb", "g/dL"},
    {"platelets", "x10^9/L"},
    {"white_blood_cell_count", "x10^9/L"},
    {"carboxy_hgb", "%"},
    {"alanine_aminotransferase_(alt)", "U/L"},
    {"albumin", "g/L"},
    {"alkaline_phosphatase", "IU/L"},
    {"bilirubin_direct", "mg/dL"},
    {"bilirubin_total", "mg/dL"},
    {"inr", "-"},
    {"lactic_acid", "mmol/L"},
    {"partial_prothrombin_time_(ptt)", "s"},
    {"protein", "g/dL"},
    {"lipase", "U/L"},
    {"b-type_natriuretic_peptide_(bnp)", "pg/ml"},
    {"troponin", "ng/ml"},
    {"fio2", "fraction"},
    {"partial_pressure_of_carbon_dioxide_(paco2)", "mmHg"},
    {"partial_pressure_of_oxygen_(pao2)", "mmHg"},
    {"ph", "-"},
    {"saturation_of_oxygen_(sao2)", "%"},
    {"hemoglobin_a1c", "%"},
    {"best_map", "mmHg"},
    {"pf_sp", "-"},
    {"pf_pa", "mmHg"},
}};

constexpr std::optional<std::size_t> feature_index(std::string_view name) {
  for (std::size_t i = 0; i < kFeatures.size(); ++i) {
    if (kFeatures[i].name == name) return i;
  }
  return std::nullopt;
}

inline constexpr std::size_t kHemoglobin = *feature_index("hemoglobin");
inline constexpr std::size_t kPlatelets = *feature_index("platelets");

}  // namespace transfuse
