#pragma once

// Error metrics, the five-model comparison table, the learning-curve export,
// and the out-of-universe robustness study.

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "corrcast/arima.hpp"
#include "corrcast/corrgen.hpp"
#include "corrcast/csv.hpp"
#include "corrcast/market_data.hpp"
#include "corrcast/neuralnet.hpp"

namespace corrcast::eval {

inline constexpr std::array<const char*, 5> kComparisonModels = {
    "ARIMA-LSTM", "Full Historical", "Constant Correlation", "Single-Index", "Multi-Group"};
inline constexpr std::array<const char*, 3> kComparisonDatasets = {"dev", "test1", "test2"};
inline constexpr std::array<const char*, 3> kMetricNames = {"mse", "rmse", "mae"};

/// Bold markers use half of a 4-decimal display step.
inline constexpr double kTieTolerance = 5e-5;

struct MetricSet {
  double mse = 0.0;
  double rmse = 0.0;
  double mae = 0.0;

  double by_index(std::size_t k) const { return k == 0 ? mse : (k == 1 ? rmse : mae); }
};

inline MetricSet metrics(std::span<const double> yhat, std::span<const double> y) {
  if (yhat.size() != y.size()) throw std::invalid_argument("metrics: length mismatch");
  if (yhat.empty()) throw std::invalid_argument("metrics: empty input");
  double se = 0.0, ae = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = y[i] - yhat[i];
    se += e * e;
    ae += std::abs(e);
  }
  MetricSet m;
  m.mse = se / static_cast<double>(y.size());
  m.rmse = std::sqrt(m.mse);
  m.mae = ae / static_cast<double>(y.size());
  return m;
}

struct PredSet {
  std::vector<double> yhat, y;
};

struct ComparisonTable {
  std::vector<std::string> models;    // row order
  std::vector<std::string> datasets;  // column-group order
  std::map<std::string, std::map<std::string, MetricSet>> values;
  // bold[model][dataset][metric]: true when the value ties the column minimum
  std::map<std::string, std::map<std::string, std::array<bool, 3>>> bold;
};

/// Metrics for every model and dataset, with column minima marked. All five
/// models and all three datasets must be present.
inline ComparisonTable compare_models(
    const std::map<std::string, std::map<std::string, PredSet>>& predictions) {
  ComparisonTable table;
  table.models.assign(kComparisonModels.begin(), kComparisonModels.end());
  table.datasets.assign(kComparisonDatasets.begin(), kComparisonDatasets.end());
  for (const auto& model : table.models) {
    const auto mit = predictions.find(model);
    if (mit == predictions.end()) throw std::runtime_error("compare_models: missing model " + model);
    for (const auto& dataset : table.datasets) {
      const auto dit = mit->second.find(dataset);
      if (dit == mit->second.end())
        throw std::runtime_error("compare_models: missing dataset " + dataset + " for model " + model);
      table.values[model][dataset] = metrics(dit->second.yhat, dit->second.y);
      table.bold[model][dataset] = {false, false, false};
    }
  }
  for (const auto& dataset : table.datasets) {
    for (std::size_t k = 0; k < kMetricNames.size(); ++k) {
      double minimum = std::numeric_limits<double>::infinity();
      for (const auto& model : table.models)
        minimum = std::min(minimum, table.values[model][dataset].by_index(k));
      for (const auto& model : table.models)
        if (table.values[model][dataset].by_index(k) <= minimum + kTieTolerance)
          table.bold[model][dataset][k] = true;
    }
  }
  return table;
}

inline nlohmann::json comparison_json(const ComparisonTable& table) {
  nlohmann::json j;
  j["datasets"] = table.datasets;
  j["metrics"] = std::vector<std::string>(kMetricNames.begin(), kMetricNames.end());
  auto& models = j["models"] = nlohmann::json::array();
  for (const auto& model : table.models) {
    nlohmann::json row;
    row["name"] = model;
    for (const auto& dataset : table.datasets) {
      const auto& m = table.values.at(model).at(dataset);
      const auto& b = table.bold.at(model).at(dataset);
      row[dataset] = {{"mse", m.mse},   {"rmse", m.rmse},   {"mae", m.mae},
                      {"mse_best", b[0]}, {"rmse_best", b[1]}, {"mae_best", b[2]}};
    }
    models.push_back(row);
  }
  return j;
}

/// Fixed-width text rendering; column minima are flagged with '*'.
inline std::string comparison_text(const ComparisonTable& table) {
  std::ostringstream out;
  out << std::left << std::setw(22) << "Model";
  for (const auto& dataset : table.datasets)
    for (const auto* metric : kMetricNames) {
      std::string head = dataset;
      head += "_";
      head += metric;
      out << std::right << std::setw(13) << head;
    }
  out << "\n";
  out << std::string(22 + 13 * table.datasets.size() * kMetricNames.size(), '-') << "\n";
  for (const auto& model : table.models) {
    out << std::left << std::setw(22) << model;
    for (const auto& dataset : table.datasets) {
      const auto& m = table.values.at(model).at(dataset);
      const auto& b = table.bold.at(model).at(dataset);
      for (std::size_t k = 0; k < kMetricNames.size(); ++k) {
        std::ostringstream cell;
        cell << std::fixed << std::setprecision(4) << m.by_index(k) << (b[k] ? "*" : " ");
        out << std::right << std::setw(13) << cell.str();
      }
    }
    out << "\n";
  }
  out << "* column minimum (ties within " << kTieTolerance << ")\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Learning-curve export.

inline void learning_curve_export(const std::string& path, const std::vector<nn::EpochRecord>& records,
                                  int selected_epoch, const std::string& meta) {
  if (records.empty()) throw std::invalid_argument("learning_curve_export: no records");
  csv::Writer out(path);
  out.comment(meta);
  out.row(std::vector<std::string>{"epoch", "train_mse", "dev_mse", "train_mae", "dev_mae", "selected"});
  for (const auto& r : records)
    out.row(std::vector<std::string>{std::to_string(r.epoch), csv::format_double(r.train_mse),
                                     csv::format_double(r.dev_mse), csv::format_double(r.train_mae),
                                     csv::format_double(r.dev_mae),
                                     r.epoch == selected_epoch ? "1" : "0"});
}

// ---------------------------------------------------------------------------
// Robustness study on assets outside the training universe.

struct RobustnessRun {
  int iteration = 0;
  std::vector<std::string> tickers;
  MetricSet metric_set;
  int rows = 0;
};

struct RobustnessConfig {
  int iterations = 10;
  int assets = 10;
  std::uint64_t seed = 10007;
  corr::PanelConfig panel;
  std::vector<arima::Order> candidates = arima::default_candidates();
  arima::FitOptions fit_options;
  nn::TrainConfig train;        // for prediction-time dropout scaling only
  std::string slice = "test2";  // which walk-forward slice is scored
  int threads = 1;
};

inline int slice_index(const std::string& name) {
  for (std::size_t s = 0; s < corr::kSliceNames.size(); ++s)
    if (name == corr::kSliceNames[s]) return static_cast<int>(s);
  throw std::invalid_argument("unknown slice name: " + name);
}

/**
 * Re-run the correlation -> ARIMA-residual -> LSTM pipeline on freshly
 * sampled assets disjoint from the training universe, once per iteration,
 * and score the configured walk-forward slice.
 */
inline std::vector<RobustnessRun> robustness_study(const nn::ModelParams& model,
                                                   const data::PriceTable& cleaned,
                                                   const std::vector<std::string>& training_universe,
                                                   const RobustnessConfig& cfg) {
  std::vector<std::string> pool;
  {
    const std::set<std::string> used(training_universe.begin(), training_universe.end());
    for (const auto& t : cleaned.tickers)
      if (!used.count(t)) pool.push_back(t);
  }
  if (static_cast<int>(pool.size()) < cfg.assets)
    throw std::runtime_error("robustness_study: insufficient pool (" + std::to_string(pool.size()) +
                             " tickers outside the training universe, need " +
                             std::to_string(cfg.assets) + ")");

  const int slice = slice_index(cfg.slice);
  Rng rng(cfg.seed);
  std::vector<RobustnessRun> runs;
  for (int iter = 1; iter <= cfg.iterations; ++iter) {
    const auto idx = rng.sample_indices(pool.size(), static_cast<std::size_t>(cfg.assets));
    std::vector<std::string> chosen;
    chosen.reserve(idx.size());
    for (const auto i : idx) chosen.push_back(pool[i]);
    const data::PriceTable sub = data::select_tickers(cleaned, chosen);

    const auto panel = corr::build_corr_panel(sub, cfg.panel, cfg.threads);
    std::vector<double> xy;
    Eigen::MatrixXd X(static_cast<Eigen::Index>(panel.size()), arima::kInputSteps);
    Eigen::VectorXd Y(static_cast<Eigen::Index>(panel.size()));
    Eigen::Index row = 0;
    for (const auto& series : panel) {
      const auto slices = corr::split_walk_forward(series);
      const auto& values = slices.slices[static_cast<std::size_t>(slice)];
      try {
        const auto fit = arima::select_best_order(values, cfg.candidates, nullptr, cfg.fit_options);
        const auto resid = arima::residuals(fit, values);
        const auto supervised = arima::extract_xy(resid);
        for (int k = 0; k < arima::kInputSteps; ++k) X(row, k) = supervised.x[static_cast<std::size_t>(k)];
        Y(row) = supervised.y;
        ++row;
      } catch (const std::runtime_error&) {
        // series whose every candidate order failed are skipped, as in training
      }
    }
    if (row == 0) throw std::runtime_error("robustness_study: no usable series in iteration " +
                                           std::to_string(iter));
    X.conservativeResize(row, Eigen::NoChange);
    Y.conservativeResize(row);

    const Eigen::VectorXd yhat = nn::predict(X, model, cfg.train);
    RobustnessRun run;
    run.iteration = iter;
    run.tickers = sub.tickers;
    run.rows = static_cast<int>(row);
    run.metric_set = metrics(std::span<const double>(yhat.data(), static_cast<std::size_t>(yhat.size())),
                             std::span<const double>(Y.data(), static_cast<std::size_t>(Y.size())));
    runs.push_back(std::move(run));
  }
  return runs;
}

inline nlohmann::json robustness_json(const std::vector<RobustnessRun>& runs, const std::string& slice,
                                      int offsets) {
  nlohmann::json j;
  j["slice"] = slice;
  j["note"] = "rows per iteration = C(assets,2) x " + std::to_string(offsets) +
              " offsets (minus skipped series); with 10 assets and 5 offsets this is 225 candidate "
              "rows, not the 180 sometimes quoted for a 4-per-pair layout";
  auto& arr = j["iterations"] = nlohmann::json::array();
  for (const auto& run : runs)
    arr.push_back({{"iteration", run.iteration},
                   {"tickers", run.tickers},
                   {"rows", run.rows},
                   {"mse", run.metric_set.mse},
                   {"rmse", run.metric_set.rmse},
                   {"mae", run.metric_set.mae}});
  return j;
}

}  // namespace corrcast::eval
