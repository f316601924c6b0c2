#pragma once

#include <iosfwd>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "velander/evaluation.hpp"

namespace velander {

// Report emitters. Column order is fixed so reruns diff cleanly:
//   cv           dataset,regime,fold,train_size,test_size,train_apl,test_apl
//   tld          segment,year_target,year_source,regime,apl_transfer,apl_optimal,tld
//   sld          dataset,regime,target_lo,target_hi,source_lo,source_hi,apl_transfer,apl_optimal,sld
//   aggregation  dataset,regime,level,samples,mean_train_apl_normalized,mean_test_apl_normalized
//   curves       level,kind,tau,E,x,y          (E empty on curve rows)
// Doubles are written in shortest round-trip form.

struct TldEntry {
  std::string segment;
  int year_target = 0;
  int year_source = 0;
  Regime regime = Regime::C1;
  TransferResult result;
};

struct SldEntry {
  std::string dataset;
  Regime regime = Regime::C1;
  SldResult result;
};

void write_cv_csv(std::ostream& out, const std::string& dataset, const CvReport& report);
nlohmann::json cv_to_json(const std::string& dataset, const CvReport& report);

void write_tld_csv(std::ostream& out, std::span<const TldEntry> entries);
nlohmann::json tld_to_json(std::span<const TldEntry> entries);

void write_sld_csv(std::ostream& out, std::span<const SldEntry> entries);
nlohmann::json sld_to_json(std::span<const SldEntry> entries);

void write_aggregation_csv(std::ostream& out, const std::string& dataset, Regime regime,
                           std::span<const AggregationRow> rows);
nlohmann::json aggregation_to_json(const std::string& dataset, Regime regime, std::span<const AggregationRow> rows);

void write_curves_csv(std::ostream& out, const CurveExport& curves);

}  // namespace velander
