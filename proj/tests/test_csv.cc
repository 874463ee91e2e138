#include <cmath>
#include <limits>
#include <sstream>

#include <gtest/gtest.h>

#include "gaitforge/csv.h"
#include "gaitforge/training.h"
#include "gaitforge/types.h"

namespace gaitforge {
namespace {

TEST(Csv, DoublesRoundTripExactly) {
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    const double v = std::ldexp(Uniform(rng, -1.0, 1.0), static_cast<int>(Uniform(rng, -60, 60)));
    double back = 0.0;
    ASSERT_TRUE(ParseDouble(FormatDouble(v), &back));
    EXPECT_EQ(back, v);
  }
  for (double v : {0.0, -0.0, 1e-310, std::numeric_limits<double>::max(), 0.1}) {
    double back = 1.0;
    ASSERT_TRUE(ParseDouble(FormatDouble(v), &back));
    EXPECT_EQ(back, v);
  }
  EXPECT_EQ(FormatDouble(0.1), "0.1");
}

TEST(Csv, ParseDoubleRejectsGarbage) {
  double v = 0.0;
  EXPECT_FALSE(ParseDouble("", &v));
  EXPECT_FALSE(ParseDouble("1.5x", &v));
  EXPECT_FALSE(ParseDouble("abc", &v));
  EXPECT_TRUE(ParseDouble("-2.5e3", &v));
  EXPECT_EQ(v, -2500.0);
}

TEST(Csv, WriterReaderRoundTrip) {
  std::ostringstream out;
  CsvWriter w(out, {"name", "x", "n"});
  w.Add("a").Add(0.125).Add(7);
  w.EndRow();
  w.Add("b").Add(-3.0).Add(-1);
  w.EndRow();
  const CsvTable t = ParseCsv(out.str(), "mem");
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.Column("x"), 1);
  EXPECT_EQ(t.Column("missing"), -1);
  EXPECT_EQ(t.Number(1, 1), -3.0);
  EXPECT_EQ(t.NumericColumn("n"), (std::vector<double>{7.0, -1.0}));
}

TEST(Csv, BadCellNamesRowAndColumn) {
  const CsvTable t = ParseCsv("a,b\n1,2\n3,oops\n", "f.csv");
  try {
    t.Number(1, 1);
    FAIL();
  } catch (const LoadError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("b"), std::string::npos) << msg;
  }
}

TEST(Csv, RaggedRowRejected) {
  EXPECT_THROW(ParseCsv("a,b\n1,2,3\n", "f.csv"), LoadError);
}

TEST(TrainLogCsv, RoundTrip) {
  TrainLog log;
  for (int i = 1; i <= 3; ++i) {
    IterationLog row;
    row.iteration = i;
    row.steps = 1000 * i;
    row.episodes = 4 * i;
    row.mean_episode_reward = 1.0 / 3.0 * i;
    row.approx_kl = 1e-7 * i;
    log.rows.push_back(row);
  }
  const std::string text = log.Csv();
  EXPECT_EQ(TrainLog::FromCsv(text).Csv(), text);
  EXPECT_EQ(ParseCsv(text, "mem").header, TrainLog::Header());
}

}  // namespace
}  // namespace gaitforge
