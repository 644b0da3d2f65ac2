#pragma once

// Subcommand dispatch for the batch pipeline. Options layer on top of the
// config file; any field not set on the command line or in the file keeps
// its stock default.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "corrcast/pipeline.hpp"

namespace corrcast::cli {

inline int run(int argc, const char* const* argv) {
  CLI::App app{"corrcast: stock-pair correlation forecasting with an ARIMA-LSTM hybrid\n"
               "and four classical baselines, under walk-forward evaluation"};
  app.require_subcommand(1);

  std::string config_path, out_dir, prices, sectors, offsets_csv, slice;
  std::uint64_t seed = 0;
  int threads = 0, universe_size = -1, window = -1, stride = -1, series_len = -1;
  int max_epochs = -1, batch_size = -1, hidden_size = -1, max_gap = -1;
  int iterations = -1, assets = -1, checkpoint_every = -1;
  double learning_rate = -1.0, dropout_p = -1.0, lambda_w = -1.0, lambda_b = -1.0;
  double max_missing_ratio = -1.0;
  bool on_returns = false;

  app.add_option("--config", config_path, "JSON config file (omitted fields keep defaults)");
  app.add_option("--out", out_dir, "run directory for artifacts");
  app.add_option("--prices", prices, "price panel CSV (date,TICKER,... header)");
  app.add_option("--sectors", sectors, "sector map CSV (ticker,sector)");
  app.add_option("--seed", seed, "base seed: universe=seed, train=seed+1, robustness=seed+2");
  app.add_option("--threads", threads, "worker thread cap for parallel stages");
  app.add_option("--universe-size", universe_size, "assets sampled into the training universe");
  app.add_option("--max-missing-ratio", max_missing_ratio, "exclusion threshold on missing ratio");
  app.add_option("--max-gap", max_gap, "exclusion threshold on consecutive missing days");
  app.add_option("--window", window, "correlation window length in days");
  app.add_option("--stride", stride, "window stride in days");
  app.add_option("--offsets", offsets_csv, "comma-separated window start offsets");
  app.add_option("--series-len", series_len, "correlation steps kept per series");
  app.add_flag("--on-returns", on_returns, "correlate daily returns instead of price levels");
  app.add_option("--max-epochs", max_epochs, "training epoch cap");
  app.add_option("--batch-size", batch_size, "mini-batch size");
  app.add_option("--hidden-size", hidden_size, "LSTM units");
  app.add_option("--learning-rate", learning_rate, "Adam learning rate");
  app.add_option("--dropout", dropout_p, "dropout probability on the final hidden state");
  app.add_option("--lambda-w", lambda_w, "weight regularization strength");
  app.add_option("--lambda-b", lambda_b, "bias regularization strength");
  app.add_option("--checkpoint-every", checkpoint_every, "epochs between checkpoints");
  app.add_option("--iterations", iterations, "robustness iterations");
  app.add_option("--assets", assets, "assets per robustness iteration");
  app.add_option("--slice", slice, "walk-forward slice scored by the robustness study");

  pipeline::SynthOptions synth_options;
  const char* stage_names[] = {"ingest",   "gen-panel", "arima-residuals", "train",
                               "evaluate", "baselines", "robustness",      "report"};
  const char* stage_help[] = {
      "load, filter, forward-fill and sample the price panel",
      "build the rolling-correlation panel and walk-forward slices",
      "fit candidate ARIMA orders per series and emit residual X/Y datasets",
      "train the LSTM on the residual datasets, checkpointing per epoch",
      "select the checkpoint epoch and emit hybrid predictions and metrics",
      "run the four classical predictors over the walk-forward slices",
      "re-test the selected model on assets outside the training universe",
      "aggregate the comparison table, learning curve and reports"};
  for (std::size_t i = 0; i < 8; ++i) app.add_subcommand(stage_names[i], stage_help[i])->fallthrough();

  auto* synth = app.add_subcommand("synth", "generate a seeded synthetic price panel and sector map");
  synth->fallthrough();
  synth->add_option("--days", synth_options.spec.days, "trading days");
  synth->add_option("--tickers", synth_options.spec.tickers, "tickers in the panel");
  synth->add_option("--synth-seed", synth_options.spec.seed, "generator seed");
  synth->add_option("--missing-rate", synth_options.spec.missing_rate, "missing-burst start probability");
  synth->add_option("--missing-burst", synth_options.spec.missing_burst, "days per missing burst");
  synth->add_option("--sector-count", synth_options.spec.sectors, "distinct sectors");
  synth->add_option("--regime-period", synth_options.spec.regime_period, "factor regime period in days");
  synth->add_option("--regime-amp", synth_options.spec.regime_amp, "factor regime amplitude");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    pipeline::RunConfig cfg;
    if (!config_path.empty()) cfg = pipeline::load_config_file(config_path);
    if (app.count("--out")) cfg.out_dir = out_dir;
    if (app.count("--prices")) cfg.prices_path = prices;
    if (app.count("--sectors")) cfg.sectors_path = sectors;
    if (app.count("--seed")) {
      cfg.universe_seed = seed;
      cfg.train.seed = seed + 1;
      cfg.robustness_seed = seed + 2;
    }
    if (app.count("--threads")) cfg.threads = threads;
    if (app.count("--universe-size")) cfg.universe_size = static_cast<std::size_t>(universe_size);
    if (app.count("--max-missing-ratio")) cfg.max_missing_ratio = max_missing_ratio;
    if (app.count("--max-gap")) cfg.max_missing_gap = max_gap;
    if (app.count("--window")) cfg.panel.window = window;
    if (app.count("--stride")) cfg.panel.stride = stride;
    if (app.count("--offsets")) {
      cfg.panel.offsets.clear();
      for (const auto& field : csv::split(offsets_csv))
        cfg.panel.offsets.push_back(static_cast<int>(csv::to_double(field, "--offsets")));
    }
    if (app.count("--series-len")) cfg.panel.series_len = series_len;
    if (app.count("--on-returns")) cfg.panel.on_returns = true;
    if (app.count("--max-epochs")) cfg.train.max_epochs = max_epochs;
    if (app.count("--batch-size")) cfg.train.batch_size = batch_size;
    if (app.count("--hidden-size")) cfg.train.hidden_size = hidden_size;
    if (app.count("--learning-rate")) cfg.train.learning_rate = learning_rate;
    if (app.count("--dropout")) cfg.train.dropout_p = dropout_p;
    if (app.count("--lambda-w")) cfg.train.lambda_w = lambda_w;
    if (app.count("--lambda-b")) cfg.train.lambda_b = lambda_b;
    if (app.count("--checkpoint-every")) cfg.train.checkpoint_every = checkpoint_every;
    if (app.count("--iterations")) cfg.robustness_iterations = iterations;
    if (app.count("--assets")) cfg.robustness_assets = assets;
    if (app.count("--slice")) cfg.robustness_slice = slice;

    const std::string stage = app.get_subcommands().front()->get_name();
    if (stage == "ingest")
      pipeline::stage_ingest(cfg);
    else if (stage == "gen-panel")
      pipeline::stage_gen_panel(cfg);
    else if (stage == "arima-residuals")
      pipeline::stage_arima_residuals(cfg);
    else if (stage == "train")
      pipeline::stage_train(cfg);
    else if (stage == "evaluate")
      pipeline::stage_evaluate(cfg);
    else if (stage == "baselines")
      pipeline::stage_baselines(cfg);
    else if (stage == "robustness")
      pipeline::stage_robustness(cfg);
    else if (stage == "report")
      pipeline::stage_report(cfg);
    else if (stage == "synth")
      pipeline::stage_synth(cfg, synth_options);
    else
      throw std::runtime_error("unknown subcommand: " + stage);
    std::cout << "corrcast " << stage << ": done (out=" << cfg.out_dir << ")\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace corrcast::cli
