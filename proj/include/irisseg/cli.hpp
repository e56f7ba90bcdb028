#pragma once

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "irisseg/irisseg.hpp"

namespace irisseg::cli {

namespace fs = std::filesystem;

inline std::string fmt(double v, int precision = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

inline std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string numbered(std::string_view prefix, int n) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*s_%05d.pgm", static_cast<int>(prefix.size()), prefix.data(), n);
  return buf;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

/// Sorted regular files in `dir` whose name starts with `prefix` and ends in .pgm.
inline std::vector<fs::path> list_pgm(const fs::path& dir, std::string_view prefix) {
  if (!fs::is_directory(dir)) throw Error(dir.string() + " is not a directory");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto name = e.path().filename().string();
    if (name.size() >= prefix.size() && name.compare(0, prefix.size(), prefix) == 0 && e.path().extension() == ".pgm")
      out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Loads a dataset directory written by gen-data (img_/geo_/lash_ triples, matched by number).
inline std::vector<EyeSample> load_dataset(const fs::path& dir) {
  std::vector<EyeSample> out;
  for (const auto& img : list_pgm(dir, "img_")) {
    const auto suffix = img.filename().string().substr(4);
    EyeSample s{load_image(img), load_labels(dir / ("geo_" + suffix)), load_binary(dir / ("lash_" + suffix))};
    require_same_shape(s.image, s.geometry, img.string());
    require_same_shape(s.image, s.lashes, img.string());
    out.push_back(std::move(s));
  }
  if (out.empty()) throw DataError("no img_*.pgm samples in " + dir.string());
  return out;
}

inline void store_sample(const fs::path& dir, int n, const EyeSample& s) {
  store_image(dir / numbered("img", n), s.image);
  store_labels(dir / numbered("geo", n), s.geometry);
  store_binary(dir / numbered("lash", n), s.lashes);
}

inline PriorMode parse_prior(const std::string& s) {
  if (s == "off") return PriorMode::off;
  if (s == "plugin") return PriorMode::plugin;
  if (s == "trained") return PriorMode::trained;
  throw ParameterError("unknown prior mode '" + s + "'");
}

inline std::string metrics_header() { return "image,Acc,Prec,Recall,MIOU,ICRate"; }

inline std::string metrics_row(const std::string& id, const SegmentationScores& s, std::optional<double> ic) {
  return id + "," + fmt(s.accuracy) + "," + fmt(s.precision) + "," + fmt(s.recall) + "," + fmt(s.mean_iou) + "," +
         (ic ? fmt(*ic) : std::string());
}

/// Per-image rows plus an aggregate row ("ALL", from the summed confusion matrix).
inline std::string evaluation_csv(const std::vector<std::string>& ids, const Evaluation& ev) {
  std::string out = metrics_header() + "\n";
  for (std::size_t n = 0; n < ids.size(); ++n)
    out += metrics_row(ids[n], ev.rows[n].geometry, ev.rows[n].ic_rate) + "\n";
  out += metrics_row("ALL", ev.geometry, ev.mean_ic_rate) + "\n";
  return out;
}

inline int threads_from_env() {
  if (const char* v = std::getenv("IRISSEG_THREADS")) {
    const int n = std::atoi(v);
    if (n >= 1) return n;
  }
  return 1;
}

/// Runs one command line. Returns the process exit code: 0 success, 1 runtime
/// or I/O failure, 2 usage error. Diagnostics are single lines on `err`.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"irisseg: eye segmentation losses, fields, convex prior, alignment and a two-headed trainer"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Render synthetic eye images with geometry and eyelash masks");
  int gen_n = 10, gen_size = 64;
  std::uint64_t gen_seed = 1;
  std::string gen_out;
  gen->add_option("--n", gen_n, "Number of samples")->check(CLI::PositiveNumber);
  gen->add_option("--size", gen_size, "Image side in pixels (>= 32)")->check(CLI::Range(32, 4096));
  gen->add_option("--seed", gen_seed, "Random seed");
  gen->add_option("--out", gen_out, "Output directory")->required();

  // align-lashes
  auto* align = app.add_subcommand("align-lashes", "Thin or thicken eyelash masks (lash_*.pgm) to a common width");
  std::string align_in, align_out, align_strategy = "thicken";
  double align_c = 1.5;
  align->add_option("--in", align_in, "Input directory")->required();
  align->add_option("--out", align_out, "Output directory")->required();
  align->add_option("--strategy", align_strategy, "thin or thicken")->check(CLI::IsMember({"thin", "thicken"}));
  align->add_option("--c", align_c, "Distance threshold in pixels")->check(CLI::NonNegativeNumber);

  // lash-hist
  auto* hist = app.add_subcommand("lash-hist", "Histogram of mean negative inside distance of eyelash masks");
  std::string hist_in, hist_out, hist_bins_out;
  int hist_bins = 40;
  double hist_lo = -3.0, hist_hi = 0.0;
  hist->add_option("--in", hist_in, "Directory of lash_*.pgm masks")->required();
  hist->add_option("--out", hist_out, "Per-mask CSV (mask_id,d_hat); stdout when omitted");
  hist->add_option("--bins-out", hist_bins_out, "Binned counts CSV; appended to the main output when omitted");
  hist->add_option("--bins", hist_bins, "Number of bins")->check(CLI::Range(2, 100000));
  hist->add_option("--lo", hist_lo, "Lower histogram edge");
  hist->add_option("--hi", hist_hi, "Upper histogram edge");

  // fields
  auto* fields = app.add_subcommand("fields", "Export signed distance fields and boundary maps (FLD1)");
  std::string fields_in, fields_out, fields_boundary_out;
  int fields_width = 3;
  double fields_sigma = 1.0;
  bool fields_lashes = false;
  fields->add_option("--in", fields_in, "Geometry mask (.pgm)")->required();
  fields->add_option("--out", fields_out, "Signed distance field output (.fld)")->required();
  fields->add_option("--boundary-out", fields_boundary_out, "Boundary map output (.fld)");
  fields->add_option("--width", fields_width, "Boundary width in pixels")->check(CLI::PositiveNumber);
  fields->add_option("--sigma", fields_sigma, "Boundary blur sigma (0 = no blur)")->check(CLI::NonNegativeNumber);
  fields->add_flag("--lashes", fields_lashes, "Input is a 0/255 eyelash mask (2-channel field)");

  // convexify
  auto* convexify = app.add_subcommand("convexify", "Replace eye structures in geometry masks by their convex hulls");
  std::string cvx_in, cvx_out;
  int cvx_exempt = 0;
  convexify->add_option("--in", cvx_in, "Geometry mask file, or directory of geo_*.pgm")->required();
  convexify->add_option("--out", cvx_out, "Output file or directory")->required();
  convexify->add_option("--prior-exempt-eyeball", cvx_exempt, "1 = leave the eyeball untouched")
      ->check(CLI::IsMember({0, 1}));

  // train
  auto* train_cmd = app.add_subcommand("train", "Train the two-headed segmenter");
  TrainConfig tc;
  std::string tr_data, tr_val, tr_out, tr_losses = "D", tr_noise_losses = "D", tr_prior = "off";
  int tr_exempt = 0, tr_n_train = 200, tr_n_val = 50, tr_size = 64;
  train_cmd->add_option("--data", tr_data, "Training directory (gen-data layout); synthetic when omitted");
  train_cmd->add_option("--val", tr_val, "Validation directory; synthetic when omitted");
  train_cmd->add_option("--n-train", tr_n_train, "Synthetic training samples")->check(CLI::PositiveNumber);
  train_cmd->add_option("--n-val", tr_n_val, "Synthetic validation samples")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--size", tr_size, "Synthetic image size")->check(CLI::Range(32, 4096));
  train_cmd->add_option("--out", tr_out, "Output directory (model.thm, train_log.csv, val_metrics.csv)")->required();
  train_cmd->add_option("--epochs", tc.epochs, "Epochs")->check(CLI::PositiveNumber);
  train_cmd->add_option("--batch", tc.batch, "Mini-batch size")->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", tc.lr0, "Initial learning rate")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--power", tc.poly_power, "Polynomial decay power");
  train_cmd->add_option("--losses", tr_losses, "Geometry losses: D, D_b, D+B, D+S, D+B+S, ...");
  train_cmd->add_option("--noise-losses", tr_noise_losses, "Noise losses: D, D_b, D+S, D_b+S");
  train_cmd->add_option("--prior", tr_prior, "Convex prior: off, plugin, trained")
      ->check(CLI::IsMember({"off", "plugin", "trained"}));
  train_cmd->add_option("--prior-exempt-eyeball", tr_exempt, "1 = no convex prior on the eyeball")
      ->check(CLI::IsMember({0, 1}));
  train_cmd->add_option("--prior-warmup", tc.prior_warmup, "Fraction of epochs before the trained prior is applied")
      ->check(CLI::Range(0.0, 0.999999));
  train_cmd->add_option("--lambda-b", tc.lambda_boundary, "Boundary loss weight")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--lambda-noise", tc.lambda_noise, "Noise head weight")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--eps", tc.eps, "Loss smoothing epsilon")->check(CLI::PositiveNumber);
  train_cmd->add_option("--channels", tc.channels, "Encoder channels")->check(CLI::PositiveNumber);
  train_cmd->add_option("--boundary-width", tc.boundary.width, "Boundary map width")->check(CLI::PositiveNumber);
  train_cmd->add_option("--boundary-sigma", tc.boundary.blur_sigma, "Boundary map blur sigma")
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_flag("--augment", tc.augment, "Random size-preserving augmentation each epoch");
  train_cmd->add_option("--seed", tc.seed, "Random seed (data, init, shuffling)");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Score predicted geometry masks: Acc, Prec, Recall, MIOU, ICRate");
  std::string ev_pred, ev_truth, ev_model, ev_data, ev_out, ev_prior = "off";
  int ev_exempt = 0;
  eval->add_option("--pred", ev_pred, "Predicted mask file or directory");
  eval->add_option("--truth", ev_truth, "Ground-truth mask file or directory");
  eval->add_option("--model", ev_model, "Checkpoint to predict with (use with --data)");
  eval->add_option("--data", ev_data, "Dataset directory for --model");
  eval->add_option("--prior", ev_prior, "Convex prior applied to --model predictions")
      ->check(CLI::IsMember({"off", "plugin", "trained"}));
  eval->add_option("--prior-exempt-eyeball", ev_exempt, "1 = no convex prior on the eyeball")
      ->check(CLI::IsMember({0, 1}));
  eval->add_option("--out", ev_out, "Also write the CSV here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "usage error: " << msg << " (see --help)\n";
    return 2;
  }

  try {
    if (*gen) {
      fs::create_directories(gen_out);
      std::string manifest = "id,seed,image,geometry,lashes,background_share,eyeball_share,pupil_share,iris_share,lash_share\n";
      for (int n = 0; n < gen_n; ++n) {
        const auto seed = derive_seed(gen_seed, kTrainStream, static_cast<std::uint64_t>(n));
        const auto s = generate_eye(seed, gen_size);
        store_sample(gen_out, n, s);
        std::array<double, kGeometryClasses> share{};
        for (auto v : s.geometry.values()) share[v] += 1.0;
        const double total = static_cast<double>(s.geometry.pixel_count());
        manifest += std::to_string(n) + "," + std::to_string(seed) + "," + numbered("img", n) + "," +
                    numbered("geo", n) + "," + numbered("lash", n);
        for (double c : share) manifest += "," + fmt(c / total);
        manifest += "," + fmt(static_cast<double>(count_set(s.lashes)) / total) + "\n";
      }
      write_text(fs::path(gen_out) / "manifest.csv", manifest);
    } else if (*align) {
      fs::create_directories(align_out);
      const auto strategy = align_strategy == "thin" ? AlignStrategy::thin : AlignStrategy::thicken;
      const auto files = list_pgm(align_in, "lash_");
      if (files.empty()) throw DataError("no lash_*.pgm masks in " + align_in);
      for (const auto& f : files) store_binary(fs::path(align_out) / f.filename(), align_lashes(load_binary(f), strategy, align_c));
    } else if (*hist) {
      const auto files = list_pgm(hist_in, "lash_");
      if (files.empty()) throw DataError("no lash_*.pgm masks in " + hist_in);
      std::vector<BinaryMask> masks;
      for (const auto& f : files) masks.push_back(load_binary(f));
      const auto h = lash_histogram(masks, hist_bins, hist_lo, hist_hi);
      std::string per_mask = "mask_id,d_hat\n";
      for (std::size_t n = 0; n < files.size(); ++n) per_mask += files[n].stem().string() + "," + fmt(h.d_hats[n]) + "\n";
      std::string bins = "bin,lo,hi,count\n";
      for (std::size_t b = 0; b < h.counts.size(); ++b)
        bins += std::to_string(b) + "," + fmt(h.edges[b]) + "," + fmt(h.edges[b + 1]) + "," + std::to_string(h.counts[b]) + "\n";
      if (hist_bins_out.empty()) {
        per_mask += "\n" + bins;
      } else {
        write_text(hist_bins_out, bins);
      }
      if (hist_out.empty())
        out << per_mask;
      else
        write_text(hist_out, per_mask);
    } else if (*fields) {
      if (fields_lashes) {
        const auto m = load_binary(fields_in);
        store_field(fields_out, signed_distance_field(m));
        if (!fields_boundary_out.empty())
          store_field(fields_boundary_out, boundary_map(to_labels(m), {fields_width, fields_sigma}));
      } else {
        const auto m = load_labels(fields_in);
        store_field(fields_out, signed_distance_field(m, kGeometryClasses));
        if (!fields_boundary_out.empty()) store_field(fields_boundary_out, boundary_map(m, {fields_width, fields_sigma}));
      }
    } else if (*convexify) {
      const ConvexPriorConfig cfg{PriorMode::plugin, cvx_exempt == 1};
      if (fs::is_directory(cvx_in)) {
        fs::create_directories(cvx_out);
        for (const auto& f : list_pgm(cvx_in, "geo_"))
          store_labels(fs::path(cvx_out) / f.filename(), convexify_labels(load_labels(f), cfg));
      } else {
        store_labels(cvx_out, convexify_labels(load_labels(cvx_in), cfg));
      }
    } else if (*train_cmd) {
      tc.geometry_losses = parse_losses(tr_losses);
      tc.noise_losses = parse_losses(tr_noise_losses);
      if (tc.noise_losses.boundary) throw ParameterError("the noise head has no boundary term");
      tc.prior = {parse_prior(tr_prior), tr_exempt == 1};
      tc.threads = threads_from_env();
      const auto train_set = tr_data.empty() ? synthetic_set(tc.seed, kTrainStream, tr_n_train, tr_size) : load_dataset(tr_data);
      const auto val_set = tr_val.empty() ? synthetic_set(tc.seed, kValidationStream, tr_n_val, tr_size) : load_dataset(tr_val);
      const auto result = train(tc, train_set, val_set);

      fs::create_directories(tr_out);
      store_checkpoint(fs::path(tr_out) / "model.thm", result.model);
      std::string log = "epoch,lr,lambda_s,train_loss,val_MIOU,val_noise_IoU,val_ICRate\n";
      for (const auto& e : result.log)
        log += std::to_string(e.epoch) + "," + fmt_g(e.learning_rate) + "," + fmt_g(e.lambda_s) + "," +
               fmt_g(e.train_loss) + "," + fmt_g(e.val_miou) + "," + fmt_g(e.val_noise_iou) + "," +
               (e.val_ic_rate ? fmt_g(*e.val_ic_rate) : std::string()) + "\n";
      write_text(fs::path(tr_out) / "train_log.csv", log);
      if (!val_set.empty()) {
        // Scored with the checkpoint as stored (32-bit parameters).
        const auto stored = load_checkpoint(fs::path(tr_out) / "model.thm");
        const auto ev = evaluate(stored, val_set, tc.prior);
        std::vector<std::string> ids;
        for (std::size_t n = 0; n < val_set.size(); ++n) ids.push_back("val_" + std::to_string(n));
        write_text(fs::path(tr_out) / "val_metrics.csv", evaluation_csv(ids, ev));
        out << "losses=" << to_string(tc.geometry_losses) << " prior=" << to_string(tc.prior.mode)
            << " val_MIOU=" << fmt(ev.geometry.mean_iou) << " noise_IoU=" << fmt(ev.noise_iou)
            << " ICRate=" << (ev.mean_ic_rate ? fmt(*ev.mean_ic_rate) : std::string("n/a")) << "\n";
      }
    } else if (*eval) {
      std::vector<std::string> ids;
      std::vector<EvaluationRow> rows;
      ConfusionMatrix gcm(kGeometryClasses), ncm(kNoiseClasses);
      if (!ev_model.empty()) {
        if (ev_data.empty()) throw ParameterError("--model needs --data");
        const auto model = load_checkpoint(ev_model);
        const ConvexPriorConfig prior{parse_prior(ev_prior), ev_exempt == 1};
        const auto data = load_dataset(ev_data);
        for (std::size_t n = 0; n < data.size(); ++n) {
          rows.push_back(score_prediction(predict(model, data[n].image, prior), data[n].geometry, data[n].lashes, &gcm, &ncm));
          ids.push_back("sample_" + std::to_string(n));
        }
      } else {
        if (ev_pred.empty() || ev_truth.empty()) throw ParameterError("evaluate needs --pred and --truth, or --model and --data");
        std::vector<std::pair<fs::path, fs::path>> pairs;
        if (fs::is_directory(ev_truth)) {
          auto truths = list_pgm(ev_truth, "geo_");
          if (truths.empty()) truths = list_pgm(ev_truth, "");
          for (const auto& t : truths) pairs.emplace_back(fs::path(ev_pred) / t.filename(), t);
        } else {
          pairs.emplace_back(ev_pred, ev_truth);
        }
        if (pairs.empty()) throw DataError("no masks to evaluate");
        for (const auto& [p, t] : pairs) {
          const auto pred = load_labels(p);
          const auto truth = load_labels(t);
          const auto cm = confusion(pred, truth, kGeometryClasses);
          gcm += cm;
          rows.push_back({metrics_from_confusion(cm), 1.0, ic_rate(pred)});
          ids.push_back(t.stem().string());
        }
      }
      const auto csv = evaluation_csv(ids, summarize(std::move(rows), gcm, ncm));
      if (!ev_out.empty()) write_text(ev_out, csv);
      out << csv;
    }
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error: " << msg << "\n";
    return 1;
  }
  return 0;
}

}  // namespace irisseg::cli
