#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "transfuse/bundle.hpp"
#include "transfuse/errors.hpp"
#include "transfuse/tune.hpp"

using namespace transfuse;

namespace {

std::size_t count(const SearchSpace& s) { return grid(s).size(); }

void xor_data(Eigen::Index n, std::uint64_t seed, Eigen::MatrixXd& X, Eigen::VectorXd& y) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  X.resize(n, 3);
  y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) X(i, j) = u(rng);
    y(i) = (X(i, 0) > 0) != (X(i, 1) > 0) ? 1 : 0;
  }
}

}  // namespace

TEST(Grid, FullGridSizes) {
  EXPECT_EQ(count(full_space(Family::RF, ForestParams{})), 192u);
  EXPECT_EQ(count(full_space(Family::SVM, SvmParams{})), 40u);
  EXPECT_EQ(count(full_space(Family::GBT, BoostParams{})), 72u);
  EXPECT_EQ(full_space(Family::RF, ForestParams{}).cardinality(), 192u);
  // var_smoothing only distinguishes GNB specs: 5 other families + 6 GNB.
  EXPECT_EQ(full_meta_space().cardinality(), 36u);
  EXPECT_EQ(count(full_meta_space()), 11u);
}

TEST(Grid, FullGridValueLists) {
  std::set<int> trees, splits, depths;
  for (const auto& s : grid(full_space(Family::RF, ForestParams{}))) {
    const auto& p = std::get<ForestParams>(s);
    trees.insert(p.n_trees);
    splits.insert(p.min_samples_split);
    depths.insert(p.max_depth);
  }
  EXPECT_EQ(trees, (std::set<int>{100, 150, 200, 300, 500, 1000, 1500, 3000}));
  EXPECT_EQ(splits, (std::set<int>{2, 4, 5, 10}));
  EXPECT_EQ(depths, (std::set<int>{5, 8, 10, 12, 15, 20}));

  std::set<std::string> kernels;
  std::set<double> cs;
  for (const auto& s : grid(full_space(Family::SVM, SvmParams{}))) {
    kernels.insert(std::string(kernel_name(std::get<SvmParams>(s).kernel)));
    cs.insert(std::get<SvmParams>(s).C);
  }
  EXPECT_EQ(kernels, (std::set<std::string>{"linear", "poly", "sigmoid", "rbf"}));
  EXPECT_EQ(cs, (std::set<double>{0.2, 0.5, 0.8, 1, 1.5, 3, 5, 10, 25, 50}));

  std::set<double> rates, gammas;
  std::set<int> stages, gdepths;
  for (const auto& s : grid(full_space(Family::GBT, BoostParams{}))) {
    const auto& p = std::get<BoostParams>(s);
    rates.insert(p.learning_rate);
    stages.insert(p.n_stages);
    gdepths.insert(p.max_depth);
    gammas.insert(p.gamma);
  }
  EXPECT_EQ(rates, (std::set<double>{0.01, 0.1}));
  EXPECT_EQ(stages, (std::set<int>{100, 250, 500}));
  EXPECT_EQ(gdepths, (std::set<int>{5, 7, 12, 15}));
  EXPECT_EQ(gammas, (std::set<double>{0, 0.1, 1}));
}

TEST(Grid, ReducedSpacesAreSubsets) {
  for (const Family f : {Family::RF, Family::SVM, Family::GBT, Family::FNN}) {
    ModelSpec base = f == Family::RF ? ModelSpec{ForestParams{}}
                     : f == Family::SVM ? ModelSpec{SvmParams{}}
                     : f == Family::GBT ? ModelSpec{BoostParams{}}
                                        : ModelSpec{NetParams{}};
    const auto full = full_space(f, base), reduced = reduced_space(f, base);
    ASSERT_EQ(full.axes.size(), reduced.axes.size());
    for (std::size_t a = 0; a < full.axes.size(); ++a) {
      EXPECT_EQ(full.axes[a].name, reduced.axes[a].name);
      EXPECT_LE(reduced.axes[a].values.size(), 2u);
      for (const auto& v : reduced.axes[a].values) {
        EXPECT_NE(std::find(full.axes[a].values.begin(), full.axes[a].values.end(), v), full.axes[a].values.end())
            << family_name(f) << " " << reduced.axes[a].name;
      }
    }
  }
  EXPECT_EQ(count(reduced_space(Family::RF, ForestParams{})), 8u);
  EXPECT_EQ(count(reduced_meta_space()), 3u);
}

TEST(Grid, LastAxisVariesFastest) {
  const auto specs = grid(full_space(Family::RF, ForestParams{}));
  const auto& first = std::get<ForestParams>(specs[0]);
  const auto& second = std::get<ForestParams>(specs[1]);
  EXPECT_EQ(first.n_trees, 100);
  EXPECT_EQ(first.min_samples_split, 2);
  EXPECT_EQ(first.max_depth, 5);
  EXPECT_EQ(second.n_trees, 100);
  EXPECT_EQ(second.min_samples_split, 2);
  EXPECT_EQ(second.max_depth, 8);
  EXPECT_EQ(std::get<ForestParams>(specs[6]).min_samples_split, 4);
  EXPECT_EQ(std::get<ForestParams>(specs[24]).n_trees, 150);
}

TEST(Grid, BaseHyperparametersCarriedThrough) {
  ForestParams base;
  base.seed = 42;
  base.bootstrap = false;
  for (const auto& s : grid(full_space(Family::RF, base))) {
    EXPECT_EQ(std::get<ForestParams>(s).seed, 42u);
    EXPECT_FALSE(std::get<ForestParams>(s).bootstrap);
  }
}

TEST(Grid, RejectsBadAxes) {
  SearchSpace s{Family::RF, false, ForestParams{}, {{"n_trees", {}}}};
  EXPECT_THROW(grid(s), ValidationError);
  s.axes = {{"no_such_axis", {AxisValue{1.0}}}};
  EXPECT_THROW(grid(s), ValidationError);
  s.axes = {{"max_depth", {AxisValue{-1.0}}}};
  EXPECT_THROW(grid(s), ValidationError);
  EXPECT_THROW(full_space(Family::RF, SvmParams{}), ValidationError);
  EXPECT_THROW(parse_grid_mode("huge"), ValidationError);
}

TEST(GridSearch, PlantedInteractionNeedsDepth) {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  xor_data(400, 1, X, y);
  BoostParams base;
  base.n_stages = 30;
  SearchSpace s{Family::GBT, false, base, {{"max_depth", {AxisValue{1.0}, AxisValue{3.0}}}}};
  const auto r = grid_search(X, y, s, 3, 5);
  ASSERT_EQ(r.trials.size(), 2u);
  EXPECT_EQ(std::get<BoostParams>(r.best).max_depth, 3);
  EXPECT_GT(r.trials[1].mean_auroc, r.trials[0].mean_auroc + 0.2);
  EXPECT_EQ(r.trials[0].fold_auroc.size(), 3u);
}

TEST(GridSearch, TiesBreakTowardLowerCapacity) {
  // One feature separates the classes perfectly, so every spec scores 1.
  Eigen::MatrixXd X(120, 2);
  Eigen::VectorXd y(120);
  for (Eigen::Index i = 0; i < 120; ++i) {
    y(i) = i % 2;
    X(i, 0) = y(i) * 10 + 0.01 * static_cast<double>(i);
    X(i, 1) = static_cast<double>((i * 7) % 13);
  }
  ForestParams base;
  SearchSpace s{Family::RF, false, base,
                {{"n_trees", {AxisValue{20.0}, AxisValue{10.0}}}, {"max_depth", {AxisValue{6.0}, AxisValue{3.0}}}}};
  const auto r = grid_search(X, y, s, 3, 0);
  for (const auto& t : r.trials) EXPECT_EQ(t.mean_auroc, 1.0);
  EXPECT_EQ(r.best_index, 3u);
  EXPECT_EQ(std::get<ForestParams>(r.best).max_depth, 3);
  EXPECT_EQ(std::get<ForestParams>(r.best).n_trees, 10);

  // Equal capacity (SVM capacity is C alone): first in grid order wins.
  SearchSpace k{Family::SVM, false, SvmParams{}, {{"kernel", {AxisValue{std::string("rbf")}, AxisValue{std::string("linear")}}}}};
  const auto rk = grid_search(X, y, k, 3, 0);
  EXPECT_EQ(rk.trials[0].mean_auroc, rk.trials[1].mean_auroc);
  EXPECT_EQ(rk.best_index, 0u);
}

TEST(GridSearch, DeterministicAcrossReruns) {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  xor_data(300, 9, X, y);
  const auto s = reduced_space(Family::GBT, BoostParams{});
  const auto a = grid_search(X, y, s, 3, 2), b = grid_search(X, y, s, 3, 2);
  EXPECT_EQ(a.best_index, b.best_index);
  EXPECT_EQ(describe_spec(a.best), describe_spec(b.best));
  EXPECT_EQ(a.folds, b.folds);
  for (std::size_t i = 0; i < a.trials.size(); ++i) EXPECT_EQ(a.trials[i].mean_auroc, b.trials[i].mean_auroc);
}

TEST(GridSearch, MetaSpaceSwitchesFamilies) {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  xor_data(150, 3, X, y);
  const auto r = grid_search(X, y, reduced_meta_space(), 3, 0);
  ASSERT_EQ(r.trials.size(), 3u);
  EXPECT_EQ(family_of(r.trials[0].spec), Family::LR);
  EXPECT_EQ(family_of(r.trials[1].spec), Family::GNB);
  EXPECT_EQ(family_of(r.trials[2].spec), Family::GNB);
}

TEST(GridSearch, TrialsCsv) {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  xor_data(90, 4, X, y);
  SearchSpace s{Family::GBT, false, BoostParams{}, {{"n_stages", {AxisValue{5.0}, AxisValue{10.0}}}}};
  const auto r = grid_search(X, y, s, 3, 0);
  const auto path = std::filesystem::temp_directory_path() / "transfuse_trials.csv";
  write_trials(path, r.trials);
  std::ifstream in(path);
  std::string header, line;
  std::getline(in, header);
  EXPECT_EQ(header, "index,family,spec,mean_auroc,fold1_auroc,fold2_auroc,fold3_auroc,wall_seconds");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 2);
  std::filesystem::remove(path);
}
