#include "transfuse/bundle.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "transfuse/errors.hpp"

namespace transfuse {

using nlohmann::json;

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

constexpr std::string_view kMagic = "transfuse-bundle";

json num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double num(const json& j) {
  if (j.is_number()) return j.get<double>();
  const auto s = j.get<std::string>();
  if (s == "nan") return std::nan("");
  if (s == "inf") return HUGE_VAL;
  if (s == "-inf") return -HUGE_VAL;
  throw BundleError("bad number '" + s + "'");
}

template <typename Derived>
json mat(const Eigen::MatrixBase<Derived>& m) {
  json data = json::array();
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) data.push_back(num(m(r, c)));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Eigen::MatrixXd mat(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw BundleError("matrix size mismatch");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index k = 0; k < rows * cols; ++k) m.data()[k] = num(data[static_cast<std::size_t>(k)]);
  return m;
}

json vec(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
  return a;
}

Eigen::VectorXd vec(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = num(j[i]);
  return v;
}

// ---- specs -----------------------------------------------------------------

json spec_json(const ModelSpec& spec) {
  json hp = std::visit(
      Overloaded{
          [](const LogisticParams& p) -> json {
            return {{"learning_rate", p.learning_rate}, {"l2", p.l2}, {"max_epochs", p.max_epochs}, {"tol", p.tol}};
          },
          [](const ForestParams& p) -> json {
            return {{"n_trees", p.n_trees},
                    {"min_samples_split", p.min_samples_split},
                    {"max_depth", p.max_depth},
                    {"bootstrap", p.bootstrap},
                    {"seed", p.seed}};
          },
          [](const BoostParams& p) -> json {
            return {{"learning_rate", p.learning_rate},
                    {"n_stages", p.n_stages},
                    {"max_depth", p.max_depth},
                    {"gamma", p.gamma},
                    {"seed", p.seed}};
          },
          [](const SvmParams& p) -> json {
            return {{"kernel", std::string(kernel_name(p.kernel))},
                    {"C", p.C},
                    {"tol", p.tol},
                    {"max_passes", p.max_passes},
                    {"max_train_rows", p.max_train_rows},
                    {"seed", p.seed}};
          },
          [](const NetParams& p) -> json {
            return {{"n_hidden_layers", p.n_hidden_layers},
                    {"neurons_per_layer", p.neurons_per_layer},
                    {"learning_rate", p.learning_rate},
                    {"max_epochs", p.max_epochs},
                    {"patience", p.patience},
                    {"batch_size", p.batch_size},
                    {"seed", p.seed}};
          },
          [](const NaiveBayesParams& p) -> json { return {{"var_smoothing", p.var_smoothing}}; },
          [](const AdaBoostParams& p) -> json { return {{"n_estimators", p.n_estimators}}; },
          [](const VotingParams&) -> json { return json::object(); }},
      spec);
  return {{"family", std::string(family_name(family_of(spec)))}, {"hyperparameters", std::move(hp)}};
}

ModelSpec spec_from(const json& j) {
  const Family f = parse_family(j.at("family").get<std::string>());
  const json& h = j.at("hyperparameters");
  switch (f) {
    case Family::LR:
      return LogisticParams{h.at("learning_rate"), h.at("l2"), h.at("max_epochs"), h.at("tol")};
    case Family::RF:
      return ForestParams{h.at("n_trees"), h.at("min_samples_split"), h.at("max_depth"), h.at("bootstrap"),
                          h.at("seed")};
    case Family::GBT:
      return BoostParams{h.at("learning_rate"), h.at("n_stages"), h.at("max_depth"), h.at("gamma"), h.at("seed")};
    case Family::SVM:
      return SvmParams{parse_kernel(h.at("kernel").get<std::string>()), h.at("C"), h.at("tol"), h.at("max_passes"),
                       h.at("max_train_rows"), h.at("seed")};
    case Family::FNN:
      return NetParams{h.at("n_hidden_layers"), h.at("neurons_per_layer"), h.at("learning_rate"),
                       h.at("max_epochs"),      h.at("patience"),          h.at("batch_size"),
                       h.at("seed")};
    case Family::GNB:
      return NaiveBayesParams{h.at("var_smoothing")};
    case Family::AdaBoost:
      return AdaBoostParams{h.at("n_estimators")};
    case Family::Voting:
      return VotingParams{};
  }
  throw BundleError("unknown family");
}

// ---- fitted models ---------------------------------------------------------------

json tree_json(const Tree& t) {
  json feature = json::array(), threshold = json::array(), left = json::array(), right = json::array(),
       value = json::array();
  for (const auto& n : t.nodes) {
    feature.push_back(n.feature);
    threshold.push_back(num(n.threshold));
    left.push_back(n.left);
    right.push_back(n.right);
    value.push_back(num(n.value));
  }
  return {{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right}, {"value", value}};
}

Tree tree_from(const json& j) {
  Tree t;
  const auto& f = j.at("feature");
  t.nodes.resize(f.size());
  for (std::size_t k = 0; k < f.size(); ++k) {
    auto& n = t.nodes[k];
    n.feature = f[k];
    n.threshold = num(j.at("threshold")[k]);
    n.left = j.at("left")[k];
    n.right = j.at("right")[k];
    n.value = num(j.at("value")[k]);
    if (n.feature >= 0 && (n.left <= static_cast<int>(k) || n.right <= static_cast<int>(k) ||
                           n.right >= static_cast<int>(f.size()) || n.left >= static_cast<int>(f.size()))) {
      throw BundleError("tree node has invalid children");
    }
  }
  return t;
}

json trees_json(const std::vector<Tree>& trees) {
  json a = json::array();
  for (const auto& t : trees) a.push_back(tree_json(t));
  return a;
}

std::vector<Tree> trees_from(const json& j) {
  std::vector<Tree> out;
  for (const auto& t : j) out.push_back(tree_from(t));
  return out;
}

json params_json(const ModelParams& params) {
  return std::visit(
      Overloaded{
          [](const LogisticModel& m) -> json {
            return {{"weights", vec(m.weights)}, {"intercept", num(m.intercept)}, {"epochs", m.epochs}};
          },
          [](const ForestModel& m) -> json { return {{"trees", trees_json(m.trees)}}; },
          [](const BoostedModel& m) -> json {
            return {{"base_score", num(m.base_score)},
                    {"learning_rate", num(m.learning_rate)},
                    {"stages", trees_json(m.stages)}};
          },
          [](const SvmModel& m) -> json {
            return {{"kernel", std::string(kernel_name(m.kernel))},
                    {"gamma", num(m.gamma)},
                    {"coef0", num(m.coef0)},
                    {"degree", m.degree},
                    {"support_vectors", mat(m.support_vectors)},
                    {"dual_coef", vec(m.dual_coef)},
                    {"bias", num(m.bias)},
                    {"platt_a", num(m.platt_a)},
                    {"platt_b", num(m.platt_b)},
                    {"converged", m.converged}};
          },
          [](const NetModel& m) -> json {
            json w = json::array(), b = json::array();
            for (const auto& x : m.weights) w.push_back(mat(x));
            for (const auto& x : m.biases) b.push_back(vec(x));
            return {{"weights", w}, {"biases", b}};
          },
          [](const NaiveBayesModel& m) -> json {
            return {{"log_prior", vec(Eigen::VectorXd(m.log_prior))},
                    {"means", mat(m.means)},
                    {"variances", mat(m.variances)},
                    {"epsilon", num(m.epsilon)}};
          },
          [](const AdaBoostModel& m) -> json {
            json a = json::array();
            for (const auto& s : m.stumps) {
              a.push_back({{"feature", s.feature},
                           {"threshold", num(s.threshold)},
                           {"polarity", s.polarity},
                           {"alpha", num(s.alpha)}});
            }
            return {{"stumps", a}};
          },
          [](const VotingModel&) -> json { return json::object(); }},
      params);
}

ModelParams params_from(Family f, const json& j) {
  switch (f) {
    case Family::LR:
      return LogisticModel{vec(j.at("weights")), num(j.at("intercept")), j.at("epochs")};
    case Family::RF:
      return ForestModel{trees_from(j.at("trees"))};
    case Family::GBT:
      return BoostedModel{num(j.at("base_score")), num(j.at("learning_rate")), trees_from(j.at("stages"))};
    case Family::SVM: {
      SvmModel m;
      m.kernel = parse_kernel(j.at("kernel").get<std::string>());
      m.gamma = num(j.at("gamma"));
      m.coef0 = num(j.at("coef0"));
      m.degree = j.at("degree");
      m.support_vectors = mat(j.at("support_vectors"));
      m.dual_coef = vec(j.at("dual_coef"));
      m.bias = num(j.at("bias"));
      m.platt_a = num(j.at("platt_a"));
      m.platt_b = num(j.at("platt_b"));
      m.converged = j.at("converged");
      if (m.dual_coef.size() != m.support_vectors.rows()) throw BundleError("SVM coefficient count mismatch");
      return m;
    }
    case Family::FNN: {
      NetModel m;
      for (const auto& w : j.at("weights")) m.weights.push_back(mat(w));
      for (const auto& b : j.at("biases")) m.biases.push_back(vec(b));
      if (m.weights.size() != m.biases.size() || m.weights.empty()) throw BundleError("network layer mismatch");
      return m;
    }
    case Family::GNB: {
      NaiveBayesModel m;
      const Eigen::VectorXd prior = vec(j.at("log_prior"));
      if (prior.size() != 2) throw BundleError("naive Bayes prior must have two entries");
      m.log_prior = prior;
      m.means = mat(j.at("means"));
      m.variances = mat(j.at("variances"));
      m.epsilon = num(j.at("epsilon"));
      return m;
    }
    case Family::AdaBoost: {
      AdaBoostModel m;
      for (const auto& s : j.at("stumps")) {
        m.stumps.push_back({s.at("feature"), num(s.at("threshold")), s.at("polarity"), num(s.at("alpha"))});
      }
      return m;
    }
    case Family::Voting:
      return VotingModel{};
  }
  throw BundleError("unknown family");
}

json model_json(const FittedModel& m) {
  return {{"spec", spec_json(m.spec)}, {"input_dim", m.input_dim}, {"params", params_json(m.params)}};
}

FittedModel model_from(const json& j) {
  FittedModel m;
  m.spec = spec_from(j.at("spec"));
  m.input_dim = j.at("input_dim");
  m.params = params_from(family_of(m.spec), j.at("params"));
  return m;
}

json stack_json(const StackedModel& s) {
  json base = json::array();
  for (const auto& b : s.base) base.push_back(model_json(b));
  return {{"base", base}, {"meta", model_json(s.meta)}, {"n_folds", s.n_folds}, {"seed", s.seed}};
}

StackedModel stack_from(const json& j) {
  StackedModel s;
  const auto& base = j.at("base");
  if (base.size() != 3) throw BundleError("stack must hold three base models");
  for (std::size_t k = 0; k < 3; ++k) s.base[k] = model_from(base[k]);
  s.meta = model_from(j.at("meta"));
  s.n_folds = j.at("n_folds");
  s.seed = j.at("seed");
  return s;
}

json preprocessor_json(const FittedPreprocessor& p) {
  json regs = json::array();
  for (const auto& r : p.mice.regressors) {
    regs.push_back({{"column", r.column}, {"coefficients", vec(r.coefficients)}, {"intercept", num(r.intercept)}});
  }
  return {{"kept_features", p.kept_features},
          {"undefined_correlation", p.undefined_correlation},
          {"mice",
           {{"means", vec(p.mice.means)},
            {"scales", vec(p.mice.scales)},
            {"regressors", regs},
            {"cycles", p.mice.cycles}}},
          {"minmax", {{"min", vec(p.minmax.min)}, {"max", vec(p.minmax.max)}}},
          {"pca",
           {{"mean", vec(p.pca.mean)},
            {"loadings", mat(p.pca.loadings)},
            {"eigenvalues", vec(p.pca.eigenvalues)},
            {"explained", vec(p.pca.explained)},
            {"k", p.pca.k}}},
          {"options",
           {{"missing_threshold", p.options.missing_threshold},
            {"r_max", p.options.r_max},
            {"mice_cycles", p.options.mice_cycles},
            {"variance_target", p.options.variance_target},
            {"mice_seed", p.options.mice_seed}}}};
}

FittedPreprocessor preprocessor_from(const json& j) {
  FittedPreprocessor p;
  p.kept_features = j.at("kept_features").get<std::vector<std::string>>();
  p.undefined_correlation = j.at("undefined_correlation").get<std::vector<std::string>>();
  const auto& m = j.at("mice");
  p.mice.means = vec(m.at("means"));
  p.mice.scales = vec(m.at("scales"));
  p.mice.cycles = m.at("cycles");
  for (const auto& r : m.at("regressors")) {
    p.mice.regressors.push_back({r.at("column"), vec(r.at("coefficients")), num(r.at("intercept"))});
  }
  p.minmax.min = vec(j.at("minmax").at("min"));
  p.minmax.max = vec(j.at("minmax").at("max"));
  const auto& c = j.at("pca");
  p.pca.mean = vec(c.at("mean"));
  p.pca.loadings = mat(c.at("loadings"));
  p.pca.eigenvalues = vec(c.at("eigenvalues"));
  p.pca.explained = vec(c.at("explained"));
  p.pca.k = c.at("k");
  const auto& o = j.at("options");
  p.options = {o.at("missing_threshold"), o.at("r_max"), o.at("mice_cycles"), o.at("variance_target"),
               o.at("mice_seed")};
  const auto d = static_cast<Eigen::Index>(p.kept_features.size());
  if (p.mice.means.size() != d || p.minmax.min.size() != d || p.pca.loadings.cols() != d ||
      p.pca.loadings.rows() != p.pca.k) {
    throw BundleError("preprocessor dimensions are inconsistent");
  }
  return p;
}

std::uint64_t hash_json(const json& j) { return fnv1a64(j.dump()); }

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string serialize_bundle(const ModelBundle& b) {
  json models = json::array();
  for (const auto& m : b.models) models.push_back(model_json(m));
  json body = {{"preprocessor", preprocessor_json(b.preprocessor)},
               {"models", models},
               {"stack", b.stack ? stack_json(*b.stack) : json(nullptr)},
               {"provenance",
                {{"seed", b.provenance.seed},
                 {"config_hash", b.provenance.config_hash},
                 {"created", b.provenance.created},
                 {"tool_version", b.provenance.tool_version},
                 {"held_out_year", b.provenance.held_out_year}}}};
  const std::string payload = body.dump(1);
  std::ostringstream out;
  out << kMagic << ' ' << b.version << ' ' << payload.size() << ' ' << hex64(fnv1a64(payload)) << '\n' << payload;
  return out.str();
}

ModelBundle deserialize_bundle(std::string_view text) {
  const auto eol = text.find('\n');
  if (eol == std::string_view::npos) throw BundleError("bundle header is missing");
  std::istringstream header{std::string(text.substr(0, eol))};
  std::string magic, checksum;
  int version = 0;
  std::size_t size = 0;
  if (!(header >> magic >> version >> size >> checksum) || magic != kMagic) {
    throw BundleError("not a model bundle");
  }
  if (version != kBundleVersion) {
    throw BundleError("bundle version " + std::to_string(version) + " is not supported (this build reads version " +
                      std::to_string(kBundleVersion) + ")");
  }
  const std::string_view payload = text.substr(eol + 1);
  if (payload.size() != size) {
    throw BundleError("bundle checksum failure: expected " + std::to_string(size) + " payload bytes, found " +
                      std::to_string(payload.size()));
  }
  if (hex64(fnv1a64(payload)) != checksum) throw BundleError("bundle checksum failure");

  try {
    const json body = json::parse(payload);
    ModelBundle b;
    b.version = version;
    b.preprocessor = preprocessor_from(body.at("preprocessor"));
    for (const auto& m : body.at("models")) b.models.push_back(model_from(m));
    if (!body.at("stack").is_null()) b.stack = stack_from(body.at("stack"));
    const auto& p = body.at("provenance");
    b.provenance = {p.at("seed"), p.at("config_hash"), p.at("created"), p.at("tool_version"), p.at("held_out_year")};
    return b;
  } catch (const json::exception& e) {
    throw BundleError(std::string("malformed bundle: ") + e.what());
  } catch (const ValidationError& e) {
    throw BundleError(std::string("malformed bundle: ") + e.what());
  }
}

void save_bundle(const ModelBundle& b, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << serialize_bundle(b);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

ModelBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_bundle(buf.str());
}

std::uint64_t state_hash(const FittedPreprocessor& p) { return hash_json(preprocessor_json(p)); }
std::uint64_t state_hash(const FittedModel& m) { return hash_json(model_json(m)); }
std::uint64_t state_hash(const StackedModel& s) { return hash_json(stack_json(s)); }

std::vector<std::pair<std::string, std::string>> spec_fields(const ModelSpec& spec) {
  std::vector<std::pair<std::string, std::string>> out;
  const json j = spec_json(spec);
  for (const auto& [k, v] : j.at("hyperparameters").items()) {
    out.emplace_back(k, v.is_string() ? v.get<std::string>() : v.dump());
  }
  return out;
}

std::string describe_spec(const ModelSpec& spec) {
  std::string out = std::string(family_name(family_of(spec))) + "(";
  bool first = true;
  for (const auto& [k, v] : spec_fields(spec)) {
    if (!first) out += ",";
    first = false;
    out += k + "=" + v;
  }
  return out + ")";
}

}  // namespace transfuse
