#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <mfpe/error.hpp>
#include <mfpe/io.hpp>

using namespace mfpe;

namespace {

PathEnsemble sample_ensemble() {
  PathEnsemble e;
  e.times = {0.25, 0.5};
  e.path_ids = {0, 2, 3};
  e.states = {1.0, 1.5, -0.1, 0.1 + 0.2, 1e-300, 7.25};
  e.seed = 12345678901234ULL;
  e.epsilon = 1e-3;
  e.requested = 4;
  e.flagged = 1;
  return e;
}

}  // namespace

TEST(EnsembleIo, BinaryRoundTripIsExact) {
  const auto e = sample_ensemble();
  std::stringstream s;
  write_ensemble_binary(e, s);
  const auto r = read_ensemble_binary(s);
  EXPECT_EQ(r.times, e.times);
  EXPECT_EQ(r.path_ids, e.path_ids);
  EXPECT_EQ(r.states, e.states);
  EXPECT_EQ(r.seed, e.seed);
  EXPECT_EQ(r.epsilon, e.epsilon);
  EXPECT_EQ(r.requested, e.requested);
  EXPECT_EQ(r.flagged, e.flagged);
}

TEST(EnsembleIo, BinaryRejectsGarbage) {
  std::stringstream bad("NOPE....");
  EXPECT_THROW(read_ensemble_binary(bad), Error);
  const auto e = sample_ensemble();
  std::stringstream s;
  write_ensemble_binary(e, s);
  std::stringstream cut(s.str().substr(0, s.str().size() - 3));
  EXPECT_THROW(read_ensemble_binary(cut), Error);
}

TEST(EnsembleIo, CsvHasOneRowPerPathAndTime) {
  const auto e = sample_ensemble();
  std::stringstream s;
  write_ensemble_csv(e, s);
  std::string line;
  std::getline(s, line);
  EXPECT_EQ(line, "pathId,time,state");
  int rows = 0;
  while (std::getline(s, line)) ++rows;
  EXPECT_EQ(rows, 6);
  std::stringstream again;
  write_ensemble_csv(e, again);
  EXPECT_NE(again.str().find("3,0.5,7.25\n"), std::string::npos);
  EXPECT_NE(again.str().find("2,0.5,0.30000000000000004\n"), std::string::npos);
}

TEST(DensityIo, CsvRoundTrip) {
  DensityGrid d(GridSpec{-1.0, 2.0, 30}, 0.5);
  for (int j = 0; j < 30; ++j) d.values[j] = 0.1 * j + 1.0 / 3.0;
  std::stringstream s;
  write_density_csv(d, s);
  const auto r = read_density_csv(s, 0.5);
  EXPECT_EQ(r.grid.n, 30);
  EXPECT_NEAR(r.grid.xmin, -1.0, 1e-12);
  EXPECT_NEAR(r.grid.xmax, 2.0, 1e-12);
  EXPECT_EQ(r.values, d.values);
}

TEST(DensityIo, RejectsMalformedFiles) {
  std::stringstream no_header("1,2\n3,4\n");
  EXPECT_THROW(read_density_csv(no_header), Error);
  std::stringstream bad_row("x,value\n1,2\nabc\n");
  EXPECT_THROW(read_density_csv(bad_row), Error);
}

TEST(ReportIo, JsonKeysInOrder) {
  ComparisonReport r;
  r.l1_distance = 0.01;
  r.ks_statistic = 0.005;
  r.mc_stderr_band = 0.002;
  r.mass = {0.001, 0.02};
  r.tolerance = 0.03;
  r.pass = true;
  const auto text = to_json(r);
  const auto j = nlohmann::ordered_json::parse(text);
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"l1Distance", "ksStatistic", "mcStdErrBand", "massAccounting", "tolerance",
                                            "verdict"}));
  EXPECT_EQ(j["verdict"], "pass");
  EXPECT_EQ(j["massAccounting"]["fpeLeak"], 0.02);
}
