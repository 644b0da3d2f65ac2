#pragma once

// Batch pipeline stages over a run directory. Stages communicate only through
// artifact files; each artifact carries the producing stage and config hash in
// a '#' header line (CSV) or a "_meta" object (JSON). Timestamps live solely
// in run_meta.json so re-running a stage yields byte-identical artifacts.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "corrcast/arima.hpp"
#include "corrcast/baselines.hpp"
#include "corrcast/corrgen.hpp"
#include "corrcast/csv.hpp"
#include "corrcast/eval_report.hpp"
#include "corrcast/market_data.hpp"
#include "corrcast/neuralnet.hpp"
#include "corrcast/parallel.hpp"
#include "corrcast/synthetic.hpp"

namespace corrcast::pipeline {

struct RunConfig {
  std::string prices_path = "prices.csv";
  std::string sectors_path = "sectors.csv";
  std::string out_dir = "run";

  std::size_t universe_size = 150;
  std::uint64_t universe_seed = 42;
  double max_missing_ratio = 0.01;
  int max_missing_gap = 5;

  corr::PanelConfig panel;

  std::vector<arima::Order> candidates = arima::default_candidates();
  bool arima_constant = true;

  nn::TrainConfig train;

  int robustness_iterations = 10;
  int robustness_assets = 10;
  std::uint64_t robustness_seed = 10007;
  std::string robustness_slice = "test2";

  int threads = 1;
};

// ---------------------------------------------------------------------------
// Config file handling: any omitted field keeps its stock default.

inline nlohmann::json config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["paths"] = {{"prices", c.prices_path}, {"sectors", c.sectors_path}, {"out", c.out_dir}};
  j["universe"] = {{"size", c.universe_size},
                   {"seed", c.universe_seed},
                   {"max_missing_ratio", c.max_missing_ratio},
                   {"max_gap", c.max_missing_gap}};
  j["panel"] = {{"window", c.panel.window},
                {"stride", c.panel.stride},
                {"offsets", c.panel.offsets},
                {"series_len", c.panel.series_len},
                {"on_returns", c.panel.on_returns}};
  nlohmann::json orders = nlohmann::json::array();
  for (const auto& o : c.candidates) orders.push_back({o.p, o.d, o.q});
  j["arima"] = {{"candidates", orders}, {"constant", c.arima_constant}};
  j["train"] = nn::config_json(c.train);
  j["train"]["checkpoint_every"] = c.train.checkpoint_every;
  j["train"]["converge_gap"] = c.train.converge_gap;
  j["train"]["converge_delta"] = c.train.converge_delta;
  j["train"]["converge_window"] = c.train.converge_window;
  j["robustness"] = {{"iterations", c.robustness_iterations},
                     {"assets", c.robustness_assets},
                     {"seed", c.robustness_seed},
                     {"slice", c.robustness_slice}};
  j["threads"] = c.threads;
  return j;
}

inline RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig c;
  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    c.prices_path = p.value("prices", c.prices_path);
    c.sectors_path = p.value("sectors", c.sectors_path);
    c.out_dir = p.value("out", c.out_dir);
  }
  if (j.contains("universe")) {
    const auto& u = j.at("universe");
    c.universe_size = u.value("size", c.universe_size);
    c.universe_seed = u.value("seed", c.universe_seed);
    c.max_missing_ratio = u.value("max_missing_ratio", c.max_missing_ratio);
    c.max_missing_gap = u.value("max_gap", c.max_missing_gap);
  }
  if (j.contains("panel")) {
    const auto& p = j.at("panel");
    c.panel.window = p.value("window", c.panel.window);
    c.panel.stride = p.value("stride", c.panel.stride);
    c.panel.offsets = p.value("offsets", c.panel.offsets);
    c.panel.series_len = p.value("series_len", c.panel.series_len);
    c.panel.on_returns = p.value("on_returns", c.panel.on_returns);
  }
  if (j.contains("arima")) {
    const auto& a = j.at("arima");
    if (a.contains("candidates")) {
      c.candidates.clear();
      for (const auto& o : a.at("candidates")) {
        if (!o.is_array() || o.size() != 3)
          throw std::runtime_error("config: arima.candidates entries must be [p,d,q]");
        c.candidates.push_back({o[0].get<int>(), o[1].get<int>(), o[2].get<int>()});
      }
    }
    c.arima_constant = a.value("constant", c.arima_constant);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    c.train.hidden_size = t.value("hidden_size", c.train.hidden_size);
    c.train.batch_size = t.value("batch_size", c.train.batch_size);
    c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
    c.train.beta1 = t.value("beta1", c.train.beta1);
    c.train.beta2 = t.value("beta2", c.train.beta2);
    c.train.epsilon = t.value("epsilon", c.train.epsilon);
    c.train.max_epochs = t.value("max_epochs", c.train.max_epochs);
    c.train.seed = t.value("seed", c.train.seed);
    c.train.lambda_w = t.value("lambda_w", c.train.lambda_w);
    c.train.lambda_b = t.value("lambda_b", c.train.lambda_b);
    if (t.contains("regularizer"))
      c.train.regularizer =
          t.at("regularizer").get<std::string>() == "l1" ? nn::Regularizer::l1 : nn::Regularizer::l2;
    c.train.dropout_p = t.value("dropout_p", c.train.dropout_p);
    if (t.contains("dropout_mode"))
      c.train.dropout_mode = t.at("dropout_mode").get<std::string>() == "inverted"
                                 ? nn::DropoutMode::inverted
                                 : nn::DropoutMode::classical;
    c.train.grad_clip = t.value("grad_clip", c.train.grad_clip);
    c.train.shuffle = t.value("shuffle", c.train.shuffle);
    c.train.checkpoint_every = t.value("checkpoint_every", c.train.checkpoint_every);
    c.train.converge_gap = t.value("converge_gap", c.train.converge_gap);
    c.train.converge_delta = t.value("converge_delta", c.train.converge_delta);
    c.train.converge_window = t.value("converge_window", c.train.converge_window);
  }
  if (j.contains("robustness")) {
    const auto& r = j.at("robustness");
    c.robustness_iterations = r.value("iterations", c.robustness_iterations);
    c.robustness_assets = r.value("assets", c.robustness_assets);
    c.robustness_seed = r.value("seed", c.robustness_seed);
    c.robustness_slice = r.value("slice", c.robustness_slice);
  }
  c.threads = j.value("threads", c.threads);
  return c;
}

inline RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing config file: " + path);
  nlohmann::json j;
  in >> j;
  return config_from_json(j);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const char ch : s) {
    h ^= static_cast<unsigned char>(ch);
    h *= 1099511628211ULL;
  }
  return h;
}

/// Hash of the semantic configuration: paths and the thread cap do not alter
/// artifact contents, so they stay out of the hash.
inline std::string config_hash(const RunConfig& c) {
  nlohmann::json j = config_to_json(c);
  j.erase("paths");
  j.erase("threads");
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

inline std::string stage_meta(const RunConfig& c, const std::string& stage) {
  return "corrcast stage=" + stage + " config=" + config_hash(c);
}

// ---------------------------------------------------------------------------
// Artifact paths and bookkeeping.

namespace artifact {

inline std::string cleaned_prices(const RunConfig& c) { return c.out_dir + "/cleaned_prices.csv"; }
inline std::string sampled_prices(const RunConfig& c) { return c.out_dir + "/sampled_prices.csv"; }
inline std::string universe(const RunConfig& c) { return c.out_dir + "/universe.json"; }
inline std::string filter_report(const RunConfig& c) { return c.out_dir + "/filter_report.json"; }
inline std::string panel(const RunConfig& c) { return c.out_dir + "/panel.csv"; }
inline std::string slice(const RunConfig& c, const std::string& name) { return c.out_dir + "/" + name + ".csv"; }
inline std::string slice_x(const RunConfig& c, const std::string& name) { return c.out_dir + "/" + name + "_X.csv"; }
inline std::string slice_y(const RunConfig& c, const std::string& name) { return c.out_dir + "/" + name + "_Y.csv"; }
inline std::string arima_report(const RunConfig& c) { return c.out_dir + "/arima_report.json"; }
inline std::string checkpoints_dir(const RunConfig& c) { return c.out_dir + "/checkpoints"; }
inline std::string checkpoint(const RunConfig& c, int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "/epoch_%04d.json", epoch);
  return checkpoints_dir(c) + buf;
}
inline std::string epoch_log(const RunConfig& c) { return c.out_dir + "/epoch_log.csv"; }
inline std::string selection(const RunConfig& c) { return c.out_dir + "/selection.json"; }
inline std::string predictions_hybrid(const RunConfig& c) { return c.out_dir + "/predictions_hybrid.csv"; }
inline std::string metrics_hybrid(const RunConfig& c) { return c.out_dir + "/metrics_hybrid.json"; }
inline std::string predictions_baselines(const RunConfig& c) { return c.out_dir + "/predictions_baselines.csv"; }
inline std::string baselines_report(const RunConfig& c) { return c.out_dir + "/baselines_report.json"; }
inline std::string robustness(const RunConfig& c) { return c.out_dir + "/robustness.json"; }
inline std::string comparison_json_path(const RunConfig& c) { return c.out_dir + "/comparison.json"; }
inline std::string comparison_text_path(const RunConfig& c) { return c.out_dir + "/comparison.txt"; }
inline std::string learning_curve(const RunConfig& c) { return c.out_dir + "/learning_curve.csv"; }
inline std::string effective_config(const RunConfig& c) { return c.out_dir + "/effective_config.json"; }
inline std::string run_meta(const RunConfig& c) { return c.out_dir + "/run_meta.json"; }

}  // namespace artifact

inline void require_artifact(const std::string& path, const std::string& producer) {
  if (!std::filesystem::exists(path))
    throw std::runtime_error("missing artifact " + path + "; run `corrcast " + producer + "` first");
}

inline void write_json_artifact(const std::string& path, nlohmann::json j, const RunConfig& c,
                                const std::string& stage) {
  j["_meta"] = {{"stage", stage}, {"config", config_hash(c)}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(1) << "\n";
}

/// Timestamps are confined to this one file.
inline void record_stage(const RunConfig& c, const std::string& stage) {
  std::filesystem::create_directories(c.out_dir);
  nlohmann::json meta;
  {
    std::ifstream in(artifact::run_meta(c));
    if (in) {
      try {
        in >> meta;
      } catch (...) {
        meta = nlohmann::json::object();
      }
    }
  }
  if (!meta.contains("stages")) meta["stages"] = nlohmann::json::array();
  const auto now = std::chrono::system_clock::now();
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
  meta["stages"].push_back(
      {{"stage", stage}, {"unix_time", secs}, {"config", config_hash(c)}});
  std::ofstream out(artifact::run_meta(c));
  out << meta.dump(1) << "\n";

  // effective configuration echo (no timestamps; byte-stable per config)
  nlohmann::json echo = config_to_json(c);
  echo["config_hash"] = config_hash(c);
  std::ofstream cfg_out(artifact::effective_config(c));
  cfg_out << echo.dump(1) << "\n";
}

// ---------------------------------------------------------------------------
// Matrix-style CSV helpers for slice and X/Y files.

inline void write_value_rows(const std::string& path, const std::vector<std::vector<double>>& rows,
                             const std::string& column_prefix, const RunConfig& c,
                             const std::string& stage) {
  csv::Writer out(path);
  out.comment(stage_meta(c, stage));
  std::vector<std::string> header;
  const std::size_t cols = rows.empty() ? 0 : rows.front().size();
  for (std::size_t k = 1; k <= cols; ++k) header.push_back(column_prefix + std::to_string(k));
  out.row(header);
  for (const auto& r : rows) out.numeric_row(r);
}

inline std::vector<std::vector<double>> read_value_rows(const std::string& path) {
  const auto raw = csv::read_rows(path);
  if (raw.empty()) throw std::runtime_error("empty artifact: " + path);
  std::vector<std::vector<double>> rows;
  rows.reserve(raw.size() - 1);
  for (std::size_t r = 1; r < raw.size(); ++r) {
    std::vector<double> row(raw[r].size());
    for (std::size_t ci = 0; ci < raw[r].size(); ++ci)
      row[ci] = csv::to_double(raw[r][ci], path + " row " + std::to_string(r));
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Stages.

inline void stage_ingest(const RunConfig& c) {
  std::filesystem::create_directories(c.out_dir);
  const data::PriceTable raw = data::load_prices(c.prices_path);
  auto [filtered, report] = data::filter_assets(raw, c.max_missing_ratio, c.max_missing_gap);
  const data::PriceTable cleaned = data::forward_fill(filtered);
  const auto draw = data::sample_universe(cleaned, c.universe_size, c.universe_seed);
  const data::PriceTable sampled = data::select_tickers(cleaned, draw);

  sim::write_prices_csv(artifact::cleaned_prices(c), cleaned, stage_meta(c, "ingest"));
  sim::write_prices_csv(artifact::sampled_prices(c), sampled, stage_meta(c, "ingest"));
  write_json_artifact(artifact::universe(c),
                      {{"universe", sampled.tickers}, {"draw_order", draw}}, c, "ingest");
  write_json_artifact(artifact::filter_report(c), data::filter_report_json(report), c, "ingest");
  record_stage(c, "ingest");
}

inline void stage_gen_panel(const RunConfig& c) {
  require_artifact(artifact::sampled_prices(c), "ingest");
  const data::PriceTable table = data::load_prices(artifact::sampled_prices(c));
  const auto panel = corr::build_corr_panel(table, c.panel, c.threads);
  corr::write_panel(artifact::panel(c), panel, stage_meta(c, "gen-panel"));

  for (std::size_t s = 0; s < corr::kSliceNames.size(); ++s) {
    std::vector<std::vector<double>> rows;
    rows.reserve(panel.size());
    for (const auto& series : panel) {
      const auto slices = corr::split_walk_forward(series);
      rows.push_back(slices.slices[s]);
    }
    write_value_rows(artifact::slice(c, corr::kSliceNames[s]), rows, "v", c, "gen-panel");
  }
  record_stage(c, "gen-panel");
}

inline void stage_arima_residuals(const RunConfig& c) {
  for (const auto* name : corr::kSliceNames) require_artifact(artifact::slice(c, name), "gen-panel");

  arima::FitOptions options;
  options.estimate_constant = c.arima_constant;
  nlohmann::json report;
  for (const auto* name : corr::kSliceNames) {
    const auto rows = read_value_rows(artifact::slice(c, name));
    struct RowResult {
      bool ok = false;
      arima::Order order;
      int candidate_failures = 0;
      std::vector<double> x;
      double y = 0.0;
    };
    std::vector<RowResult> results(rows.size());
    parallel_for(rows.size(), c.threads, [&](std::size_t i) {
      RowResult& res = results[i];
      try {
        const auto fit =
            arima::select_best_order(rows[i], c.candidates, &res.candidate_failures, options);
        const auto resid = arima::residuals(fit, rows[i]);
        const auto supervised = arima::extract_xy(resid);
        res.order = fit.order;
        res.x = supervised.x;
        res.y = supervised.y;
        res.ok = true;
      } catch (const std::runtime_error&) {
        res.ok = false;  // every candidate failed; the row is skipped and counted
      }
    });

    std::vector<std::vector<double>> x_rows, y_rows;
    std::map<std::string, int> selected;
    std::vector<std::size_t> skipped;
    int candidate_failures = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
      candidate_failures += results[i].candidate_failures;
      if (!results[i].ok) {
        skipped.push_back(i);
        continue;
      }
      ++selected[results[i].order.str()];
      x_rows.push_back(results[i].x);
      y_rows.push_back({results[i].y});
    }
    write_value_rows(artifact::slice_x(c, name), x_rows, "x", c, "arima-residuals");
    write_value_rows(artifact::slice_y(c, name), y_rows, "y", c, "arima-residuals");
    report[name] = {{"rows", rows.size()},
                    {"kept", x_rows.size()},
                    {"skipped_rows", skipped},
                    {"candidate_failures", candidate_failures},
                    {"selected_orders", selected}};
  }
  write_json_artifact(artifact::arima_report(c), report, c, "arima-residuals");
  record_stage(c, "arima-residuals");
}

inline Eigen::MatrixXd rows_to_matrix(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size()) throw std::runtime_error("ragged matrix rows");
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

inline void stage_train(const RunConfig& c) {
  require_artifact(artifact::slice_x(c, "train"), "arima-residuals");
  require_artifact(artifact::slice_y(c, "train"), "arima-residuals");
  require_artifact(artifact::slice_x(c, "dev"), "arima-residuals");
  require_artifact(artifact::slice_y(c, "dev"), "arima-residuals");

  const Eigen::MatrixXd train_x = rows_to_matrix(read_value_rows(artifact::slice_x(c, "train")));
  const Eigen::MatrixXd dev_x = rows_to_matrix(read_value_rows(artifact::slice_x(c, "dev")));
  const Eigen::MatrixXd train_y_m = rows_to_matrix(read_value_rows(artifact::slice_y(c, "train")));
  const Eigen::MatrixXd dev_y_m = rows_to_matrix(read_value_rows(artifact::slice_y(c, "dev")));

  const auto result = nn::train(train_x, train_y_m.col(0), dev_x, dev_y_m.col(0), c.train,
                                artifact::checkpoints_dir(c));
  nn::write_epoch_log(artifact::epoch_log(c), result.records, stage_meta(c, "train"));
  record_stage(c, "train");
}

/// Per-slice (ticker_i, ticker_j, offset) labels for supervised rows, with the
/// rows skipped by the ARIMA stage removed.
inline std::vector<std::array<std::string, 3>> slice_row_labels(const RunConfig& c,
                                                                const std::string& slice_name) {
  require_artifact(artifact::panel(c), "gen-panel");
  require_artifact(artifact::arima_report(c), "arima-residuals");
  const auto panel = corr::read_panel(artifact::panel(c));
  nlohmann::json report;
  {
    std::ifstream in(artifact::arima_report(c));
    in >> report;
  }
  std::set<std::size_t> skipped;
  for (const auto& v : report.at(slice_name).at("skipped_rows")) skipped.insert(v.get<std::size_t>());
  std::vector<std::array<std::string, 3>> labels;
  for (std::size_t i = 0; i < panel.size(); ++i) {
    if (skipped.count(i)) continue;
    labels.push_back({panel[i].ticker_a, panel[i].ticker_b, std::to_string(panel[i].offset)});
  }
  return labels;
}

inline void stage_evaluate(const RunConfig& c) {
  require_artifact(artifact::epoch_log(c), "train");
  const auto records = nn::read_epoch_log(artifact::epoch_log(c));
  const int selected = nn::select_epoch(records);
  require_artifact(artifact::checkpoint(c, selected), "train");
  const auto ckpt = nn::load_checkpoint(artifact::checkpoint(c, selected));

  csv::Writer pred_out(artifact::predictions_hybrid(c));
  pred_out.comment(stage_meta(c, "evaluate"));
  pred_out.row(std::vector<std::string>{"ticker_i", "ticker_j", "offset", "slice", "yhat", "y"});
  nlohmann::json metric_json;
  for (const auto* name : corr::kSliceNames) {
    require_artifact(artifact::slice_x(c, name), "arima-residuals");
    require_artifact(artifact::slice_y(c, name), "arima-residuals");
    const Eigen::MatrixXd x = rows_to_matrix(read_value_rows(artifact::slice_x(c, name)));
    const Eigen::MatrixXd y = rows_to_matrix(read_value_rows(artifact::slice_y(c, name)));
    const auto labels = slice_row_labels(c, name);
    if (static_cast<std::size_t>(x.rows()) != labels.size())
      throw std::runtime_error("evaluate: row labels out of sync for slice " + std::string(name));
    const Eigen::VectorXd yhat = nn::predict(x, ckpt.params, c.train);
    for (Eigen::Index i = 0; i < yhat.size(); ++i) {
      const auto& label = labels[static_cast<std::size_t>(i)];
      pred_out.row(std::vector<std::string>{label[0], label[1], label[2], name,
                                            csv::format_double(yhat(i)), csv::format_double(y(i, 0))});
    }
    const auto m = eval::metrics(std::span<const double>(yhat.data(), static_cast<std::size_t>(yhat.size())),
                                 std::span<const double>(y.col(0).data(), static_cast<std::size_t>(y.rows())));
    metric_json[name] = {{"mse", m.mse}, {"rmse", m.rmse}, {"mae", m.mae}, {"rows", y.rows()}};
  }
  write_json_artifact(artifact::metrics_hybrid(c), metric_json, c, "evaluate");
  write_json_artifact(artifact::selection(c),
                      {{"selected_epoch", selected}, {"epochs", records.size()}}, c, "evaluate");
  record_stage(c, "evaluate");
}

// ---------------------------------------------------------------------------
// Baselines stage.

namespace detail {

struct SliceSpec {
  const char* name;
  int start;  // 1-based start index of the slice within the 24-step series
};

// dev/test1/test2 are the comparison datasets (train is the fitting window)
inline constexpr std::array<SliceSpec, 3> kBaselineSlices = {{{"dev", 2}, {"test1", 3}, {"test2", 4}}};

}  // namespace detail

inline void stage_baselines(const RunConfig& c) {
  require_artifact(artifact::sampled_prices(c), "ingest");
  require_artifact(artifact::panel(c), "gen-panel");
  if (!std::filesystem::exists(c.sectors_path))
    throw std::runtime_error("missing sector map " + c.sectors_path +
                             " (required by the Multi-Group baseline)");

  const data::PriceTable table = data::load_prices(artifact::sampled_prices(c));
  const auto panel = corr::read_panel(artifact::panel(c));
  const auto sectors = baselines::load_sector_map(c.sectors_path);
  const int n = static_cast<int>(table.size());

  // group series values by offset, indexed by (i,j)
  std::map<int, std::map<std::pair<int, int>, const corr::CorrSeries*>> by_offset;
  for (const auto& series : panel) {
    const int i = table.ticker_index(series.ticker_a);
    const int j = table.ticker_index(series.ticker_b);
    if (i < 0 || j < 0) throw std::runtime_error("baselines: panel ticker missing from price table");
    by_offset[series.offset][{std::min(i, j), std::max(i, j)}] = &series;
  }

  csv::Writer out(artifact::predictions_baselines(c));
  out.comment(stage_meta(c, "baselines"));
  out.row(std::vector<std::string>{"model", "ticker_i", "ticker_j", "offset", "slice", "yhat", "y"});

  nlohmann::json report;
  int total_clipped = 0;
  for (const auto& [offset, pairs] : by_offset) {
    for (const auto& slice : detail::kBaselineSlices) {
      const int step20 = slice.start + 18;  // 0-based index of the slice's 20th value
      const int target = slice.start + 19;  // 0-based index of the slice's 21st value

      baselines::CorrMatrix prev;
      prev.tickers = table.tickers;
      prev.values = Eigen::MatrixXd::Identity(n, n);
      Eigen::MatrixXd targets = Eigen::MatrixXd::Zero(n, n);
      for (const auto& [key, series] : pairs) {
        prev.values(key.first, key.second) = prev.values(key.second, key.first) =
            series->values[static_cast<std::size_t>(step20)];
        targets(key.first, key.second) = targets(key.second, key.first) =
            series->values[static_cast<std::size_t>(target)];
      }

      // betas over the 100-day price window underlying the slice's step 20
      const int window_index = slice.start + 19;  // 1-based window number in the series
      const long begin = (offset - 1) + static_cast<long>(window_index - 1) * c.panel.stride;
      const long end = begin + c.panel.window - 1;
      if (end >= static_cast<long>(table.days()))
        throw std::runtime_error("baselines: price window exceeds panel length");
      const long nret = c.panel.window - 1;
      std::vector<std::vector<double>> asset_returns(static_cast<std::size_t>(n));
      std::vector<double> market(static_cast<std::size_t>(nret), 0.0);
      for (int a = 0; a < n; ++a) {
        auto& r = asset_returns[static_cast<std::size_t>(a)];
        r.resize(static_cast<std::size_t>(nret));
        for (long t = 0; t < nret; ++t) {
          const double p0 = table.prices(begin + t, a), p1 = table.prices(begin + t + 1, a);
          r[static_cast<std::size_t>(t)] = p1 / p0 - 1.0;
          market[static_cast<std::size_t>(t)] += r[static_cast<std::size_t>(t)];
        }
      }
      for (double& v : market) v /= static_cast<double>(n);
      double mmean = 0.0;
      for (const double v : market) mmean += v;
      mmean /= static_cast<double>(market.size());
      double mvar = 0.0;
      for (const double v : market) mvar += (v - mmean) * (v - mmean);
      const double sigma_m = std::sqrt(mvar / static_cast<double>(market.size() - 1));

      std::vector<baselines::BetaEstimate> betas(static_cast<std::size_t>(n));
      for (int a = 0; a < n; ++a)
        betas[static_cast<std::size_t>(a)] =
            baselines::estimate_market_model(asset_returns[static_cast<std::size_t>(a)], market);

      const auto cc = baselines::constant_correlation(prev);
      const auto si = baselines::single_index(betas, sigma_m, table.tickers);
      const auto mg = baselines::multi_group(prev, sectors);
      total_clipped += si.clipped;

      const std::array<std::pair<const char*, const Eigen::MatrixXd*>, 4> models = {
          {{"Full Historical", &prev.values},
           {"Constant Correlation", &cc.values},
           {"Single-Index", &si.matrix.values},
           {"Multi-Group", &mg.values}}};
      for (const auto& [model, matrix] : models)
        for (const auto& [key, series] : pairs)
          out.row(std::vector<std::string>{model, table.tickers[static_cast<std::size_t>(key.first)],
                                           table.tickers[static_cast<std::size_t>(key.second)],
                                           std::to_string(offset), slice.name,
                                           csv::format_double((*matrix)(key.first, key.second)),
                                           csv::format_double(targets(key.first, key.second))});
    }
  }
  report["single_index_clipped"] = total_clipped;
  write_json_artifact(artifact::baselines_report(c), report, c, "baselines");
  record_stage(c, "baselines");
}

inline void stage_robustness(const RunConfig& c) {
  require_artifact(artifact::cleaned_prices(c), "ingest");
  require_artifact(artifact::universe(c), "ingest");
  require_artifact(artifact::selection(c), "evaluate");

  nlohmann::json universe_json;
  {
    std::ifstream in(artifact::universe(c));
    in >> universe_json;
  }
  const auto universe = universe_json.at("universe").get<std::vector<std::string>>();
  nlohmann::json selection_json;
  {
    std::ifstream in(artifact::selection(c));
    in >> selection_json;
  }
  const int epoch = selection_json.at("selected_epoch").get<int>();
  require_artifact(artifact::checkpoint(c, epoch), "train");
  const auto ckpt = nn::load_checkpoint(artifact::checkpoint(c, epoch));
  const data::PriceTable cleaned = data::load_prices(artifact::cleaned_prices(c));

  eval::RobustnessConfig rc;
  rc.iterations = c.robustness_iterations;
  rc.assets = c.robustness_assets;
  rc.seed = c.robustness_seed;
  rc.panel = c.panel;
  rc.candidates = c.candidates;
  rc.fit_options.estimate_constant = c.arima_constant;
  rc.train = c.train;
  rc.slice = c.robustness_slice;
  rc.threads = c.threads;
  const auto runs = eval::robustness_study(ckpt.params, cleaned, universe, rc);
  write_json_artifact(artifact::robustness(c),
                      eval::robustness_json(runs, rc.slice, static_cast<int>(c.panel.offsets.size())),
                      c, "robustness");
  record_stage(c, "robustness");
}

inline void stage_report(const RunConfig& c) {
  require_artifact(artifact::predictions_hybrid(c), "evaluate");
  require_artifact(artifact::predictions_baselines(c), "baselines");
  require_artifact(artifact::epoch_log(c), "train");
  require_artifact(artifact::selection(c), "evaluate");

  std::map<std::string, std::map<std::string, eval::PredSet>> predictions;
  {
    const auto rows = csv::read_rows(artifact::predictions_hybrid(c));
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const auto& cells = rows[r];
      if (cells.size() != 6) throw std::runtime_error("bad hybrid prediction row");
      auto& set = predictions["ARIMA-LSTM"][cells[3]];
      set.yhat.push_back(csv::to_double(cells[4], "yhat"));
      set.y.push_back(csv::to_double(cells[5], "y"));
    }
  }
  {
    const auto rows = csv::read_rows(artifact::predictions_baselines(c));
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const auto& cells = rows[r];
      if (cells.size() != 7) throw std::runtime_error("bad baseline prediction row");
      auto& set = predictions[cells[0]][cells[4]];
      set.yhat.push_back(csv::to_double(cells[5], "yhat"));
      set.y.push_back(csv::to_double(cells[6], "y"));
    }
  }
  const auto table = eval::compare_models(predictions);
  write_json_artifact(artifact::comparison_json_path(c), eval::comparison_json(table), c, "report");
  {
    std::ofstream out(artifact::comparison_text_path(c));
    if (!out) throw std::runtime_error("cannot write " + artifact::comparison_text_path(c));
    out << "# " << stage_meta(c, "report") << "\n" << eval::comparison_text(table);
  }

  const auto records = nn::read_epoch_log(artifact::epoch_log(c));
  nlohmann::json selection_json;
  {
    std::ifstream in(artifact::selection(c));
    in >> selection_json;
  }
  eval::learning_curve_export(artifact::learning_curve(c), records,
                              selection_json.at("selected_epoch").get<int>(),
                              stage_meta(c, "report"));
  record_stage(c, "report");
}

struct SynthOptions {
  sim::PanelSpec spec;
  std::string prices_path;
  std::string sectors_path;
};

inline void stage_synth(const RunConfig& c, const SynthOptions& options) {
  std::filesystem::create_directories(c.out_dir);
  const auto table = sim::factor_regime_panel(options.spec);
  const std::string prices = options.prices_path.empty() ? c.prices_path : options.prices_path;
  const std::string sectors = options.sectors_path.empty() ? c.sectors_path : options.sectors_path;
  if (const auto parent = std::filesystem::path(prices).parent_path(); !parent.empty())
    std::filesystem::create_directories(parent);
  if (const auto parent = std::filesystem::path(sectors).parent_path(); !parent.empty())
    std::filesystem::create_directories(parent);
  sim::write_prices_csv(prices, table, stage_meta(c, "synth"));
  sim::write_sectors_csv(sectors, sim::sector_assignments(options.spec), stage_meta(c, "synth"));
  record_stage(c, "synth");
}

}  // namespace corrcast::pipeline
