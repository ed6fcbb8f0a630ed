#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "transfuse/bundle.hpp"
#include "transfuse/errors.hpp"

using namespace transfuse;

namespace {

FeatureMatrix raw_features(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u;
  FeatureMatrix m;
  m.columns = {"a", "b", "c", "d", "e"};
  m.values.resize(n, 5);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = z(rng);
    m.values(i, 0) = t + 0.3 * z(rng);
    m.values(i, 1) = -t + 0.5 * z(rng);
    m.values(i, 2) = z(rng);
    m.values(i, 3) = 2 * z(rng) + 1;
    m.values(i, 4) = u(rng) < 0.2 ? std::nan("") : t * t + z(rng);
    const int label = u(rng) < 1 / (1 + std::exp(-2 * t)) ? 1 : 0;
    m.rows.push_back({"e" + std::to_string(i), 0, 2017, label});
  }
  return m;
}

struct Fixture {
  ModelBundle bundle;
  Eigen::MatrixXd test;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture out;
    const auto train = raw_features(400, 1);
    const auto pipe = fit_pipeline(train);
    out.bundle.preprocessor = pipe.preprocessor;
    const Eigen::MatrixXd& X = pipe.transformed.values;
    const Eigen::VectorXd y = train.labels();
    ForestParams rf;
    rf.n_trees = 20;
    BoostParams gbt;
    gbt.n_stages = 20;
    SvmParams svm;
    NetParams fnn;
    fnn.max_epochs = 10;
    for (const ModelSpec& s : std::vector<ModelSpec>{LogisticParams{}, rf, gbt, svm, fnn, NaiveBayesParams{},
                                                     AdaBoostParams{}, VotingParams{}}) {
      out.bundle.models.push_back(fit_model(s, family_of(s) == Family::Voting ? Eigen::MatrixXd(X.leftCols(1)) : X, y));
    }
    out.bundle.stack = fit_stack(X, y, {rf, svm, gbt}, default_meta_spec(), 5, 2).model;
    out.bundle.provenance = {7, "abc", "2026-01-01T00:00:00Z", "0.1.0", 2020};
    out.test = apply_pipeline(pipe.preprocessor, raw_features(1000, 2)).values;
    return out;
  }();
  return f;
}

}  // namespace

TEST(Bundle, RoundTripPredictsIdentically) {
  const auto& f = fixture();
  const auto path = std::filesystem::temp_directory_path() / "transfuse_roundtrip.tfb";
  save_bundle(f.bundle, path);
  const ModelBundle back = load_bundle(path);
  std::filesystem::remove(path);

  ASSERT_EQ(back.models.size(), f.bundle.models.size());
  for (std::size_t k = 0; k < back.models.size(); ++k) {
    const auto& m = f.bundle.models[k];
    const Eigen::MatrixXd X = m.family() == Family::Voting ? Eigen::MatrixXd(f.test.leftCols(1)) : f.test;
    const Eigen::VectorXd a = predict_proba(m, X), b = predict_proba(back.models[k], X);
    EXPECT_EQ(std::memcmp(a.data(), b.data(), sizeof(double) * a.size()), 0) << family_name(m.family());
    EXPECT_EQ(state_hash(m), state_hash(back.models[k]));
    EXPECT_EQ(describe_spec(m.spec), describe_spec(back.models[k].spec));
  }
  ASSERT_TRUE(back.stack);
  const Eigen::VectorXd a = predict_stack(*f.bundle.stack, f.test), b = predict_stack(*back.stack, f.test);
  EXPECT_EQ(std::memcmp(a.data(), b.data(), sizeof(double) * a.size()), 0);

  const auto raw = raw_features(1000, 2);
  const auto ta = apply_pipeline(f.bundle.preprocessor, raw).values, tb = apply_pipeline(back.preprocessor, raw).values;
  EXPECT_EQ(std::memcmp(ta.data(), tb.data(), sizeof(double) * ta.size()), 0);
  EXPECT_EQ(state_hash(f.bundle.preprocessor), state_hash(back.preprocessor));
  EXPECT_EQ(back.provenance.held_out_year, 2020);
  EXPECT_EQ(back.provenance.created, "2026-01-01T00:00:00Z");
  EXPECT_EQ(serialize_bundle(back), serialize_bundle(f.bundle));
}

TEST(Bundle, TruncationDetected) {
  const std::string text = serialize_bundle(fixture().bundle);
  try {
    deserialize_bundle(std::string_view(text).substr(0, text.size() - 10));
    FAIL() << "truncated bundle accepted";
  } catch (const BundleError& e) {
    EXPECT_NE(std::string(e.what()).find("checksum"), std::string::npos) << e.what();
  }
}

TEST(Bundle, CorruptedByteDetected) {
  std::string text = serialize_bundle(fixture().bundle);
  const auto pos = text.rfind("0.");
  ASSERT_NE(pos, std::string::npos);
  text[pos + 2] = text[pos + 2] == '5' ? '6' : '5';
  EXPECT_THROW(deserialize_bundle(text), BundleError);
}

TEST(Bundle, VersionMismatchNamesBothVersions) {
  std::string text = serialize_bundle(fixture().bundle);
  const std::string prefix = "transfuse-bundle " + std::to_string(kBundleVersion) + " ";
  ASSERT_EQ(text.rfind(prefix, 0), 0u);
  text.replace(0, prefix.size(), "transfuse-bundle 99 ");
  try {
    deserialize_bundle(text);
    FAIL() << "future version accepted";
  } catch (const BundleError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("99"), std::string::npos) << msg;
    EXPECT_NE(msg.find(std::to_string(kBundleVersion)), std::string::npos) << msg;
  }
}

TEST(Bundle, NotABundle) {
  EXPECT_THROW(deserialize_bundle("hello\n{}"), BundleError);
  EXPECT_THROW(deserialize_bundle(""), BundleError);
}

TEST(Bundle, FnvReferenceValues) {
  // Published FNV-1a 64-bit test vectors.
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

TEST(Bundle, DescribeSpecIsCanonical) {
  EXPECT_EQ(describe_spec(ForestParams{}), "RF(bootstrap=true,max_depth=10,min_samples_split=2,n_trees=100,seed=0)");
  ForestParams other;
  other.max_depth = 3;
  EXPECT_NE(describe_spec(other), describe_spec(ForestParams{}));
}
