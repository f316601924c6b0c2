#include "velander/reports.hpp"

#include <ostream>

#include "velander/serialization.hpp"

namespace velander {
namespace {

std::string num(double v) { return format_double(v); }

// Identifiers go into CSV unquoted, so refuse anything that would break a row.
const std::string& field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") != std::string::npos) throw Error("report label contains a CSV delimiter: " + s);
  return s;
}

nlohmann::json band_json(PercentileBand b) { return nlohmann::json::array({b.lo, b.hi}); }

}  // namespace

void write_cv_csv(std::ostream& out, const std::string& dataset, const CvReport& report) {
  out << "dataset,regime,fold,train_size,test_size,train_apl,test_apl\n";
  for (const auto& f : report.per_fold) {
    out << field(dataset) << ',' << to_string(report.regime) << ',' << f.fold << ',' << f.train_size << ','
        << f.test_size << ',' << num(f.train_apl) << ',' << num(f.test_apl) << '\n';
  }
}

nlohmann::json cv_to_json(const std::string& dataset, const CvReport& report) {
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : report.per_fold) {
    folds.push_back({{"fold", f.fold},
                     {"train_size", f.train_size},
                     {"test_size", f.test_size},
                     {"train_apl", f.train_apl},
                     {"test_apl", f.test_apl}});
  }
  return {{"dataset", dataset},
          {"regime", to_string(report.regime)},
          {"folds", report.folds},
          {"seed", report.seed},
          {"per_fold", std::move(folds)},
          {"mean_train_apl", report.mean_train_apl},
          {"mean_test_apl", report.mean_test_apl}};
}

void write_tld_csv(std::ostream& out, std::span<const TldEntry> entries) {
  out << "segment,year_target,year_source,regime,apl_transfer,apl_optimal,tld\n";
  for (const auto& e : entries) {
    out << field(e.segment) << ',' << e.year_target << ',' << e.year_source << ',' << to_string(e.regime) << ','
        << num(e.result.apl_transfer) << ',' << num(e.result.apl_optimal) << ',' << num(e.result.loss_difference)
        << '\n';
  }
}

nlohmann::json tld_to_json(std::span<const TldEntry> entries) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : entries) {
    arr.push_back({{"segment", e.segment},
                   {"year_target", e.year_target},
                   {"year_source", e.year_source},
                   {"regime", to_string(e.regime)},
                   {"apl_transfer", e.result.apl_transfer},
                   {"apl_optimal", e.result.apl_optimal},
                   {"tld", e.result.loss_difference}});
  }
  return arr;
}

void write_sld_csv(std::ostream& out, std::span<const SldEntry> entries) {
  out << "dataset,regime,target_lo,target_hi,source_lo,source_hi,apl_transfer,apl_optimal,sld\n";
  for (const auto& e : entries) {
    const auto& r = e.result;
    out << field(e.dataset) << ',' << to_string(e.regime) << ',' << num(r.target.lo) << ',' << num(r.target.hi)
        << ',' << num(r.source.lo) << ',' << num(r.source.hi) << ',' << num(r.transfer.apl_transfer) << ','
        << num(r.transfer.apl_optimal) << ',' << num(r.transfer.loss_difference) << '\n';
  }
}

nlohmann::json sld_to_json(std::span<const SldEntry> entries) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : entries) {
    const auto& r = e.result;
    arr.push_back({{"dataset", e.dataset},
                   {"regime", to_string(e.regime)},
                   {"target", band_json(r.target)},
                   {"source", band_json(r.source)},
                   {"target_size", r.target_size},
                   {"source_size", r.source_size},
                   {"apl_transfer", r.transfer.apl_transfer},
                   {"apl_optimal", r.transfer.apl_optimal},
                   {"sld", r.transfer.loss_difference}});
  }
  return arr;
}

void write_aggregation_csv(std::ostream& out, const std::string& dataset, Regime regime,
                           std::span<const AggregationRow> rows) {
  out << "dataset,regime,level,samples,mean_train_apl_normalized,mean_test_apl_normalized\n";
  for (const auto& r : rows) {
    out << field(dataset) << ',' << to_string(regime) << ',' << r.level << ',' << r.samples << ','
        << num(r.mean_train_apl_normalized) << ',' << num(r.mean_test_apl_normalized) << '\n';
  }
}

nlohmann::json aggregation_to_json(const std::string& dataset, Regime regime, std::span<const AggregationRow> rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    arr.push_back({{"level", r.level},
                   {"samples", r.samples},
                   {"mean_train_apl_normalized", r.mean_train_apl_normalized},
                   {"mean_test_apl_normalized", r.mean_test_apl_normalized},
                   {"cv", cv_to_json(dataset, r.cv)}});
  }
  return {{"dataset", dataset}, {"regime", to_string(regime)}, {"levels", std::move(arr)}};
}

void write_curves_csv(std::ostream& out, const CurveExport& curves) {
  out << "level,kind,tau,E,x,y\n";
  for (const auto& p : curves.points) {
    const bool cdf = p.kind == CurvePoint::Kind::Cdf;
    out << p.level << ',' << (cdf ? "cdf" : "curve") << ',' << num(p.tau) << ',' << (cdf ? num(p.energy) : "")
        << ',' << num(p.x) << ',' << num(p.y) << '\n';
  }
}

}  // namespace velander
