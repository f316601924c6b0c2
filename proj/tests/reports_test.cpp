#include <gtest/gtest.h>

#include <sstream>

#include "velander/reports.hpp"

namespace velander {
namespace {

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

CvReport sample_cv() {
  CvReport r;
  r.regime = Regime::C4;
  r.folds = 2;
  r.seed = 42;
  r.per_fold = {{0, 3, 2, 0.5, 0.75}, {1, 3, 2, 0.25, 1.0 / 3.0}};
  r.mean_train_apl = 0.375;
  r.mean_test_apl = 0.5416666666666666;
  return r;
}

TEST(Reports, CvCsv) {
  std::ostringstream out;
  write_cv_csv(out, "SBI-8411_2023", sample_cv());
  EXPECT_EQ(out.str(),
            "dataset,regime,fold,train_size,test_size,train_apl,test_apl\n"
            "SBI-8411_2023,C4,0,3,2,0.5,0.75\n"
            "SBI-8411_2023,C4,1,3,2,0.25,0.3333333333333333\n");
}

TEST(Reports, CvJson) {
  const auto j = cv_to_json("d", sample_cv());
  EXPECT_EQ(j.at("seed"), 42);
  EXPECT_EQ(j.at("regime"), "C4");
  EXPECT_EQ(j.at("per_fold").size(), 2u);
  EXPECT_EQ(j.at("mean_train_apl"), 0.375);
}

TEST(Reports, TldCsv) {
  TldEntry e{"SBI-8411", 2023, 2022, Regime::C2, {}};
  e.result.apl_transfer = 1.5;
  e.result.apl_optimal = 1.25;
  e.result.loss_difference = 0.2;
  std::ostringstream out;
  write_tld_csv(out, std::vector<TldEntry>{e});
  EXPECT_EQ(out.str(),
            "segment,year_target,year_source,regime,apl_transfer,apl_optimal,tld\n"
            "SBI-8411,2023,2022,C2,1.5,1.25,0.2\n");
  EXPECT_EQ(tld_to_json(std::vector<TldEntry>{e})[0].at("tld"), 0.2);
}

TEST(Reports, SldCsv) {
  SldEntry e{"X", Regime::C1, {}};
  e.result.target = {0, 50};
  e.result.source = {50, 100};
  e.result.transfer.apl_transfer = 3;
  e.result.transfer.apl_optimal = 2;
  e.result.transfer.loss_difference = 0.5;
  std::ostringstream out;
  write_sld_csv(out, std::vector<SldEntry>{e});
  EXPECT_EQ(out.str(),
            "dataset,regime,target_lo,target_hi,source_lo,source_hi,apl_transfer,apl_optimal,sld\n"
            "X,C1,0,50,50,100,3,2,0.5\n");
}

TEST(Reports, AggregationCsv) {
  AggregationRow r;
  r.level = 5;
  r.samples = 1000;
  r.mean_train_apl_normalized = 2.5;
  r.mean_test_apl_normalized = 2.75;
  std::ostringstream out;
  write_aggregation_csv(out, "syn", Regime::C4, std::vector<AggregationRow>{r});
  EXPECT_EQ(out.str(),
            "dataset,regime,level,samples,mean_train_apl_normalized,mean_test_apl_normalized\n"
            "syn,C4,5,1000,2.5,2.75\n");
}

TEST(Reports, CurvesCsvLeavesEnergyBlankOnCurves) {
  CurveExport c;
  c.points.push_back({1, CurvePoint::Kind::Curve, 0.5, 0.0, 10, 12.5});
  c.points.push_back({2, CurvePoint::Kind::Cdf, 0.2, 400, 30, 0.2});
  std::ostringstream out;
  write_curves_csv(out, c);
  EXPECT_EQ(out.str(), "level,kind,tau,E,x,y\n1,curve,0.5,,10,12.5\n2,cdf,0.2,400,30,0.2\n");
}

TEST(Reports, RejectsLabelsThatBreakCsv) {
  std::ostringstream out;
  EXPECT_THROW(write_cv_csv(out, "a,b", sample_cv()), Error);
}

TEST(Reports, HeadersAreFixed) {
  std::ostringstream a, b, c;
  write_tld_csv(a, {});
  write_sld_csv(b, {});
  write_aggregation_csv(c, "d", Regime::C1, {});
  EXPECT_EQ(first_line(a.str()), "segment,year_target,year_source,regime,apl_transfer,apl_optimal,tld");
  EXPECT_EQ(first_line(b.str()),
            "dataset,regime,target_lo,target_hi,source_lo,source_hi,apl_transfer,apl_optimal,sld");
  EXPECT_EQ(first_line(c.str()),
            "dataset,regime,level,samples,mean_train_apl_normalized,mean_test_apl_normalized");
}

}  // namespace
}  // namespace velander
