#include "transfuse/tune.hpp"

#include <chrono>
#include <fstream>
#include <set>

#include "transfuse/bundle.hpp"
#include "transfuse/errors.hpp"
#include "transfuse/metrics.hpp"
#include "transfuse/sampling.hpp"

namespace transfuse {

namespace {

std::vector<AxisValue> numbers(std::initializer_list<double> v) { return {v.begin(), v.end()}; }

std::vector<AxisValue> labels(std::initializer_list<const char*> v) {
  std::vector<AxisValue> out;
  for (const char* s : v) out.emplace_back(std::string(s));
  return out;
}

double as_number(const Axis& a, const AxisValue& v) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  throw ValidationError("axis '" + a.name + "' expects numbers");
}

int as_int(const Axis& a, const AxisValue& v) { return static_cast<int>(as_number(a, v)); }

const std::string& as_label(const Axis& a, const AxisValue& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  throw ValidationError("axis '" + a.name + "' expects labels");
}

ModelSpec default_meta(Family f) {
  switch (f) {
    case Family::LR:
      return LogisticParams{};
    case Family::RF:
      return ForestParams{};
    case Family::AdaBoost:
      return AdaBoostParams{};
    case Family::Voting:
      return VotingParams{};
    case Family::FNN:
      return NetParams{};
    case Family::GNB:
      return NaiveBayesParams{};
    default:
      throw ValidationError("family " + std::string(family_name(f)) + " is not a meta-model option");
  }
}

void apply(ModelSpec& spec, const Axis& a, const AxisValue& v) {
  const std::string& n = a.name;
  auto unknown = [&] { throw ValidationError("axis '" + n + "' does not apply to " + std::string(family_name(family_of(spec)))); };
  if (n == "meta") {
    spec = default_meta(parse_family(as_label(a, v)));
    return;
  }
  if (n == "var_smoothing" && !std::holds_alternative<NaiveBayesParams>(spec)) return;
  std::visit(
      [&](auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, ForestParams>) {
          if (n == "n_trees") p.n_trees = as_int(a, v);
          else if (n == "min_samples_split") p.min_samples_split = as_int(a, v);
          else if (n == "max_depth") p.max_depth = as_int(a, v);
          else unknown();
        } else if constexpr (std::is_same_v<T, SvmParams>) {
          if (n == "kernel") p.kernel = parse_kernel(as_label(a, v));
          else if (n == "C") p.C = as_number(a, v);
          else unknown();
        } else if constexpr (std::is_same_v<T, BoostParams>) {
          if (n == "learning_rate") p.learning_rate = as_number(a, v);
          else if (n == "n_stages") p.n_stages = as_int(a, v);
          else if (n == "max_depth") p.max_depth = as_int(a, v);
          else if (n == "gamma") p.gamma = as_number(a, v);
          else unknown();
        } else if constexpr (std::is_same_v<T, NetParams>) {
          if (n == "n_hidden_layers") p.n_hidden_layers = as_int(a, v);
          else if (n == "neurons_per_layer") p.neurons_per_layer = as_int(a, v);
          else unknown();
        } else if constexpr (std::is_same_v<T, NaiveBayesParams>) {
          if (n == "var_smoothing") p.var_smoothing = as_number(a, v);
          else unknown();
        } else {
          unknown();
        }
      },
      spec);
}

std::vector<AxisValue> widths() {
  std::vector<AxisValue> out;
  for (int n = 1; n <= 61; ++n) out.emplace_back(static_cast<double>(16 + 4 * (n - 1)));
  return out;
}

}  // namespace

std::size_t SearchSpace::cardinality() const {
  std::size_t n = 1;
  for (const auto& a : axes) n *= a.values.size();
  return n;
}

GridMode parse_grid_mode(std::string_view s) {
  if (s == "full") return GridMode::Full;
  if (s == "reduced") return GridMode::Reduced;
  throw ValidationError("grid mode must be 'full' or 'reduced', got '" + std::string(s) + "'");
}

SearchSpace full_space(Family family, const ModelSpec& base) {
  if (family_of(base) != family) throw ValidationError("base spec family does not match the search space");
  SearchSpace s{family, false, base, {}};
  switch (family) {
    case Family::RF:
      s.axes = {{"n_trees", numbers({100, 150, 200, 300, 500, 1000, 1500, 3000})},
                {"min_samples_split", numbers({2, 4, 5, 10})},
                {"max_depth", numbers({5, 8, 10, 12, 15, 20})}};
      break;
    case Family::SVM:
      s.axes = {{"kernel", labels({"linear", "poly", "sigmoid", "rbf"})},
                {"C", numbers({0.2, 0.5, 0.8, 1, 1.5, 3, 5, 10, 25, 50})}};
      break;
    case Family::GBT:
      s.axes = {{"learning_rate", numbers({0.01, 0.1})},
                {"n_stages", numbers({100, 250, 500})},
                {"max_depth", numbers({5, 7, 12, 15})},
                {"gamma", numbers({0, 0.1, 1})}};
      break;
    case Family::FNN:
      s.axes = {{"n_hidden_layers", numbers({3, 4})}, {"neurons_per_layer", widths()}};
      break;
    default:
      // No search axes: the single default point.
      break;
  }
  return s;
}

SearchSpace full_meta_space() {
  return {Family::GNB, true, NaiveBayesParams{},
          {{"meta", labels({"LR", "RF", "AdaBoost", "Voting", "FNN", "GNB"})},
           {"var_smoothing", numbers({1e-9, 1e-7, 1e-5, 1e-3, 0.1, 0.5})}}};
}

SearchSpace reduced_space(Family family, const ModelSpec& base) {
  SearchSpace s = full_space(family, base);
  switch (family) {
    case Family::RF:
      s.axes = {{"n_trees", numbers({100, 300})}, {"min_samples_split", numbers({2, 10})}, {"max_depth", numbers({5, 10})}};
      break;
    case Family::SVM:
      s.axes = {{"kernel", labels({"linear", "rbf"})}, {"C", numbers({1, 10})}};
      break;
    case Family::GBT:
      s.axes = {{"learning_rate", numbers({0.1})},
                {"n_stages", numbers({100})},
                {"max_depth", numbers({5, 7})},
                {"gamma", numbers({0, 1})}};
      break;
    case Family::FNN:
      s.axes = {{"n_hidden_layers", numbers({3})}, {"neurons_per_layer", numbers({16, 32})}};
      break;
    default:
      break;
  }
  return s;
}

SearchSpace reduced_meta_space() {
  return {Family::GNB, true, NaiveBayesParams{},
          {{"meta", labels({"LR", "GNB"})}, {"var_smoothing", numbers({1e-9, 1e-3})}}};
}

SearchSpace search_space(Family family, const ModelSpec& base, GridMode mode) {
  return mode == GridMode::Full ? full_space(family, base) : reduced_space(family, base);
}

SearchSpace meta_space(GridMode mode) { return mode == GridMode::Full ? full_meta_space() : reduced_meta_space(); }

std::vector<ModelSpec> grid(const SearchSpace& space) {
  for (const auto& a : space.axes) {
    if (a.values.empty()) throw ValidationError("axis '" + a.name + "' has no values");
  }
  std::vector<ModelSpec> out;
  std::set<std::string> seen;
  std::vector<std::size_t> idx(space.axes.size(), 0);
  const std::size_t total = space.cardinality();
  for (std::size_t n = 0; n < total; ++n) {
    ModelSpec spec = space.base;
    // The meta axis replaces the spec, so it is applied first.
    for (std::size_t a = 0; a < space.axes.size(); ++a) {
      if (space.axes[a].name == "meta") apply(spec, space.axes[a], space.axes[a].values[idx[a]]);
    }
    for (std::size_t a = 0; a < space.axes.size(); ++a) {
      if (space.axes[a].name != "meta") apply(spec, space.axes[a], space.axes[a].values[idx[a]]);
    }
    validate_spec(spec);
    if (seen.insert(describe_spec(spec)).second) out.push_back(spec);
    for (std::size_t a = space.axes.size(); a-- > 0;) {
      if (++idx[a] < space.axes[a].values.size()) break;
      idx[a] = 0;
    }
  }
  return out;
}

std::vector<double> capacity_key(const ModelSpec& spec) {
  return std::visit(
      [](const auto& p) -> std::vector<double> {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, ForestParams>) {
          return {double(p.max_depth), double(p.n_trees), -double(p.min_samples_split)};
        } else if constexpr (std::is_same_v<T, BoostParams>) {
          return {double(p.max_depth), double(p.n_stages), p.learning_rate, -p.gamma};
        } else if constexpr (std::is_same_v<T, SvmParams>) {
          return {p.C};
        } else if constexpr (std::is_same_v<T, NetParams>) {
          return {double(p.n_hidden_layers), double(p.neurons_per_layer)};
        } else if constexpr (std::is_same_v<T, NaiveBayesParams>) {
          return {-p.var_smoothing};
        } else if constexpr (std::is_same_v<T, AdaBoostParams>) {
          return {double(p.n_estimators)};
        } else if constexpr (std::is_same_v<T, LogisticParams>) {
          return {-p.l2};
        } else {
          return {};
        }
      },
      spec);
}

GridSearchResult grid_search(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const SearchSpace& space,
                             int k_inner, std::uint64_t seed) {
  const std::vector<ModelSpec> specs = grid(space);
  if (specs.empty()) throw ValidationError("search grid is empty");
  if (X.rows() != y.size()) throw ValidationError("X and y differ in row count");

  GridSearchResult out;
  out.folds = stratified_folds(y, k_inner, seed);
  std::vector<Eigen::MatrixXd> Xtr, Xva;
  std::vector<Eigen::VectorXd> ytr, yva;
  for (int k = 0; k < k_inner; ++k) {
    const auto tr = rows_outside_fold(out.folds, k);
    const auto va = rows_in_fold(out.folds, k);
    Xtr.push_back(X(tr, Eigen::all));
    ytr.push_back(y(tr));
    Xva.push_back(X(va, Eigen::all));
    yva.push_back(y(va));
  }

  for (std::size_t i = 0; i < specs.size(); ++i) {
    TrialResult t;
    t.index = i;
    t.spec = specs[i];
    const auto start = std::chrono::steady_clock::now();
    for (int k = 0; k < k_inner; ++k) {
      const FittedModel m = fit_model(specs[i], Xtr[static_cast<std::size_t>(k)], ytr[static_cast<std::size_t>(k)]);
      t.fold_auroc.push_back(auroc(predict_proba(m, Xva[static_cast<std::size_t>(k)]), yva[static_cast<std::size_t>(k)]));
    }
    t.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    double sum = 0.0;
    for (const double a : t.fold_auroc) sum += a;
    t.mean_auroc = sum / static_cast<double>(k_inner);
    out.trials.push_back(std::move(t));
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < out.trials.size(); ++i) {
    const auto& a = out.trials[i];
    const auto& b = out.trials[best];
    if (a.mean_auroc > b.mean_auroc ||
        (a.mean_auroc == b.mean_auroc && capacity_key(a.spec) < capacity_key(b.spec))) {
      best = i;
    }
  }
  out.best_index = best;
  out.best = out.trials[best].spec;
  return out;
}

void write_trials(const std::filesystem::path& path, const std::vector<TrialResult>& trials) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  std::size_t folds = 0;
  for (const auto& t : trials) folds = std::max(folds, t.fold_auroc.size());
  out << "index,family,spec,mean_auroc";
  for (std::size_t k = 0; k < folds; ++k) out << ",fold" << k + 1 << "_auroc";
  out << ",wall_seconds\n";
  out.precision(17);
  for (const auto& t : trials) {
    out << t.index << ',' << family_name(family_of(t.spec)) << ",\"" << describe_spec(t.spec) << "\"," << t.mean_auroc;
    for (std::size_t k = 0; k < folds; ++k) {
      out << ',';
      if (k < t.fold_auroc.size()) out << t.fold_auroc[k];
    }
    out << ',' << t.wall_seconds << '\n';
  }
}

}  // namespace transfuse
