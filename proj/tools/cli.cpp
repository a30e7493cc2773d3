#include "cli.hpp"

#include "chewsense/events.hpp"
#include "chewsense/feedback.hpp"
#include "chewsense/io.hpp"
#include "chewsense/metrics.hpp"
#include "chewsense/pipeline.hpp"
#include "chewsense/protocol.hpp"
#include "chewsense/realtime.hpp"
#include "chewsense/synth.hpp"

#include <CLI11.hpp>

#include <pthread.h>

#include <csignal>
#include <ctime>
#include <fstream>
#include <iostream>
#include <memory>

namespace chewsense::cli {

namespace {

/// Writes to `path`, or to `fallback` when the path is empty or "-".
class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) : os_(&fallback) {
    if (!path.empty() && path != "-") {
      file_.open(path, std::ios::binary);
      if (!file_) throw Error("cannot open '" + path + "' for writing");
      os_ = &file_;
    }
  }
  std::ostream& operator*() { return *os_; }

 private:
  std::ofstream file_;
  std::ostream* os_;
};

signal::PreprocessConfig make_preprocess(double low, double high, int order, int decimation,
                                         const std::string& mode) {
  signal::PreprocessConfig pc;
  pc.filter.low_cut = low;
  pc.filter.high_cut = high;
  pc.filter.order = order;
  pc.decimation = decimation;
  if (mode == "mean") pc.mode = signal::DownsampleMode::BlockMean;
  else if (mode == "stride") pc.mode = signal::DownsampleMode::Stride;
  else throw ParameterError("downsample mode must be 'mean' or 'stride'");
  return pc;
}

struct FilterFlags {
  double low = 20.0;
  double high = 500.0;
  int order = 5;
  int decimation = 10;
  std::string mode = "mean";

  void add(CLI::App* app) {
    app->add_option("--low", low, "Band-pass lower cut-off (Hz)")->capture_default_str();
    app->add_option("--high", high, "Band-pass upper cut-off (Hz)")->capture_default_str();
    app->add_option("--order", order, "Butterworth prototype order")->capture_default_str();
    app->add_option("--decimation", decimation, "Downsampling factor")->capture_default_str();
    app->add_option("--downsample", mode, "Downsampling mode: mean or stride")->capture_default_str();
  }
  signal::PreprocessConfig config() const { return make_preprocess(low, high, order, decimation, mode); }
};

features::Task parse_task(const std::string& s) {
  if (s == "chew") return features::Task::Chew;
  if (s == "swallow") return features::Task::Swallow;
  throw ParameterError("task must be 'chew' or 'swallow'");
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  for (auto part : io::split(s, ',')) out.push_back(io::parse_double(part, "list value"));
  return out;
}

std::vector<ChewEvent> read_events_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open '" + path + "'");
  return io::read_event_log(f);
}

/// Accepts `t,rate` rows or `rate,t,rate` wire frames; other lines are skipped.
std::vector<realtime::RateSample> read_rates(std::istream& in) {
  std::vector<realtime::RateSample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto f = io::split(line, ',');
    if (f[0] == "rate") f.erase(f.begin());
    else if (f.size() != 2 || f[0] == "t") continue;
    if (f.size() != 2) throw FormatError("rates line " + std::to_string(lineno) + ": expected 't,rate'");
    out.push_back({io::parse_double(f[0], "time"), io::parse_double(f[1], "rate")});
  }
  return out;
}

/// Blocks until SIGINT/SIGTERM, or until `done` returns true.
template <typename Done>
void wait_for_shutdown(Done done) {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  const timespec tick{0, 100'000'000};
  while (!done()) {
    if (sigtimedwait(&set, nullptr, &tick) > 0) return;
  }
}

void block_shutdown_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Chewing and swallowing detection from two-channel surface EMG", "chewsense"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  std::uint64_t seed = 1;
  auto add_seed = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "Random seed")->capture_default_str();
  };

  // generate
  auto* gen = app.add_subcommand("generate", "Synthesize a two-channel recording");
  synth::SessionPlan plan;
  std::string gen_out;
  int swallow_every = 0;
  gen->add_option("--out,-o", gen_out, "Output recording path (annotations go to <path>.ann)")->required();
  gen->add_option("--rate", plan.chew_rate, "Chews per second")->capture_default_str();
  gen->add_option("--duration", plan.duration, "Eating duration (s)")->capture_default_str();
  gen->add_option("--chew-duration", plan.chew_duration_mean, "Mean chew burst length (s)")->capture_default_str();
  gen->add_option("--swallow-every", swallow_every, "Swallow after every n chews (0: none)")->capture_default_str();
  gen->add_option("--snr", plan.snr_db, "Burst-to-baseline SNR (dB)")->capture_default_str();
  gen->add_option("--lead", plan.baseline_lead, "Quiet baseline before eating (s)")->capture_default_str();
  gen->add_option("--fs", plan.sample_rate, "Sample rate (Hz)")->capture_default_str();
  gen->add_option("--gain", plan.gain, "Electrode gain")->capture_default_str();
  gen->add_option("--participant", plan.participant_id, "Participant id")->capture_default_str();
  add_seed(gen);

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "Filter, rectify, normalize and downsample a recording");
  std::string pre_in, pre_out;
  FilterFlags pre_filter;
  pre->add_option("--in,-i", pre_in, "Input recording")->required();
  pre->add_option("--out,-o", pre_out, "Output CSV (default stdout)");
  pre_filter.add(pre);

  // bursts
  auto* bursts = app.add_subcommand("bursts", "Baseline-threshold burst detection on one channel");
  std::string bu_in, bu_out, bu_channel = "masseter";
  double bu_j = 5.0;
  FilterFlags bu_filter;
  bu_filter.add(bursts);
  bursts->add_option("--in,-i", bu_in, "Input recording with a baseline annotation")->required();
  bursts->add_option("--out,-o", bu_out, "Burst CSV (default stdout)");
  bursts->add_option("--channel", bu_channel, "masseter or submental")->capture_default_str();
  bursts->add_option("--threshold-j", bu_j, "Baseline threshold multiplier")->capture_default_str();

  // featurize
  auto* feat = app.add_subcommand("featurize", "Windowed features of one or more recordings");
  std::vector<std::string> feat_in;
  std::string feat_out, feat_task = "chew";
  FilterFlags feat_filter;
  double feat_j = 5.0;
  feat->add_option("--in,-i", feat_in, "Input recordings")->required();
  feat->add_option("--out,-o", feat_out, "Output dataset CSV (default stdout)");
  feat->add_option("--task", feat_task, "chew or swallow")->capture_default_str();
  feat->add_option("--threshold-j", feat_j, "Baseline threshold multiplier")->capture_default_str();
  feat_filter.add(feat);

  // train
  auto* train = app.add_subcommand("train", "Train a linear SVM on a dataset");
  std::vector<std::string> train_in;
  std::string train_out, train_grid;
  learn::TrainConfig tc;
  int train_folds = 5;
  train->add_option("--data,-d", train_in, "Dataset CSV files")->required();
  train->add_option("--out,-o", train_out, "Output model file")->required();
  train->add_option("--C", tc.C, "Regularization constant")->capture_default_str();
  train->add_option("--grid", train_grid, "Comma-separated C values for stratified grid search");
  train->add_option("--folds", train_folds, "Grid search folds")->capture_default_str();
  train->add_option("--max-epochs", tc.max_epochs, "Iteration cap")->capture_default_str();
  train->add_option("--tol", tc.tolerance, "Convergence tolerance")->capture_default_str();
  add_seed(train);

  // eval-lopo
  auto* eval = app.add_subcommand("eval-lopo", "Leave-one-participant-out evaluation");
  std::vector<std::string> eval_in;
  std::string eval_out;
  learn::TrainConfig etc;
  eval->add_option("--data,-d", eval_in, "Dataset CSV files")->required();
  eval->add_option("--out,-o", eval_out, "Report CSV (default stdout)");
  eval->add_option("--C", etc.C, "Regularization constant")->capture_default_str();
  eval->add_option("--max-epochs", etc.max_epochs, "Iteration cap")->capture_default_str();
  add_seed(eval);

  // train-rt
  auto* trt = app.add_subcommand("train-rt", "Train the streaming chew model on recordings");
  std::vector<std::string> trt_in;
  std::string trt_out;
  learn::TrainConfig rtc;
  int trt_stride = 2;
  trt->add_option("--in,-i", trt_in, "Training recordings")->required();
  trt->add_option("--out,-o", trt_out, "Output model file")->required();
  trt->add_option("--C", rtc.C, "Regularization constant")->capture_default_str();
  trt->add_option("--stride", trt_stride, "Segment stride in decimated samples")->capture_default_str();
  add_seed(trt);

  // stream
  auto* stream = app.add_subcommand("stream", "Run the streaming detector over a recording");
  std::string st_in, st_model, st_out, st_rates;
  stream->add_option("--in,-i", st_in, "Input recording")->required();
  stream->add_option("--model,-m", st_model, "Streaming model file")->required();
  stream->add_option("--out,-o", st_out, "Event log (default stdout)");
  stream->add_option("--rates", st_rates, "Write the 1 Hz live rate series here");

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Session metrics of an event log");
  std::string an_in, an_out;
  double an_gap = 2.0;
  analyze->add_option("--events,-e", an_in, "Event log")->required();
  analyze->add_option("--gap", an_gap, "Sequence gap threshold G (s)")->capture_default_str();
  analyze->add_option("--out,-o", an_out, "Report (default stdout)");

  // serve
  auto* serve = app.add_subcommand("serve", "Serve streaming classification sessions over TCP");
  std::string sv_model, sv_logs;
  int sv_port = 7878;
  double sv_backlog = 10.0;
  std::size_t sv_max_sessions = 0;
  serve->add_option("--model,-m", sv_model, "Streaming model file")->required();
  serve->add_option("--port,-p", sv_port, "TCP port (0: any free port)")->capture_default_str();
  serve->add_option("--log-dir", sv_logs, "Directory for per-session event logs");
  serve->add_option("--max-backlog", sv_backlog, "Queued seconds of samples before slowdown")->capture_default_str();
  serve->add_option("--max-sessions", sv_max_sessions, "Exit after this many sessions (0: run until signalled)");

  // replay
  auto* replay = app.add_subcommand("replay", "Stream a recording to a server and print its replies");
  std::string rp_in, rp_host = "127.0.0.1", rp_session, rp_out;
  int rp_port = 7878, rp_frame = 64, rp_retries = 3;
  double rp_speed = 1.0, rp_rref = 1.5;
  replay->add_option("--in,-i", rp_in, "Input recording")->required();
  replay->add_option("--host", rp_host, "Server host")->capture_default_str();
  replay->add_option("--port,-p", rp_port, "Server port")->capture_default_str();
  replay->add_option("--speed", rp_speed, "Pacing factor (0: as fast as possible)")->capture_default_str();
  replay->add_option("--r-ref", rp_rref, "Reference chew rate for feedback (chews/s)")->capture_default_str();
  replay->add_option("--session", rp_session, "Session id (default: participant id)");
  replay->add_option("--frame", rp_frame, "Samples per frame")->capture_default_str();
  replay->add_option("--retries", rp_retries, "Connection retries")->capture_default_str();
  replay->add_option("--out,-o", rp_out, "Transcript file (default stdout)");

  // feedback-sim
  auto* fb = app.add_subcommand("feedback-sim", "Map a live rate series to feedback level transitions");
  std::string fb_in, fb_out;
  double fb_rref = 1.5, fb_dead = 0.0;
  fb->add_option("--rates,-r", fb_in, "Rate series: 't,rate' rows or rate frames")->required();
  fb->add_option("--r-ref", fb_rref, "Reference chew rate (chews/s)")->capture_default_str();
  fb->add_option("--dead-band", fb_dead, "Hysteresis around band edges")->capture_default_str();
  fb->add_option("--out,-o", fb_out, "Output (default stdout)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  }

  try {
    if (*gen) {
      if (swallow_every > 0) plan.swallow_every_n_chews = swallow_every;
      plan.seed = seed;
      const auto rec = synth::gen_session(plan);
      io::write_recording(rec, gen_out);
      out << "wrote " << gen_out << " (" << rec.size() << " samples, "
          << rec.intervals(AnnotationKind::Chew).size() << " chews, "
          << rec.intervals(AnnotationKind::Swallow).size() << " swallows)\n";
    } else if (*pre) {
      const auto rec = io::read_recording(pre_in);
      auto pc = pre_filter.config();
      pc.filter.sample_rate = rec.sample_rate;
      const auto p = signal::preprocess(rec, pc);
      Output o(pre_out, out);
      *o << "t_s,masseter,submental\n";
      const auto& m = p.channel(Channel::Masseter);
      const auto& s = p.channel(Channel::Submental);
      for (Eigen::Index i = 0; i < m.samples.size(); ++i) {
        *o << io::format_double(static_cast<double>(i) / m.effective_rate) << ',' << io::format_double(m.samples[i])
           << ',' << io::format_double(s.samples[i]) << '\n';
      }
    } else if (*bursts) {
      if (bu_channel != "masseter" && bu_channel != "submental") {
        throw ParameterError("channel must be 'masseter' or 'submental'");
      }
      const Channel ch = bu_channel == "masseter" ? Channel::Masseter : Channel::Submental;
      const auto rec = io::read_recording(bu_in);
      auto pc = bu_filter.config();
      pc.filter.sample_rate = rec.sample_rate;
      const auto processed = signal::preprocess(rec, pc);
      const auto& sig = processed.channel(ch);
      const auto baseline = rec.intervals(AnnotationKind::Baseline);
      if (baseline.empty()) throw DataError("bursts: recording has no baseline annotation");
      const double thr = events::compute_threshold(events::baseline_stats(sig, baseline.front()), bu_j);
      const auto found = events::detect_bursts(sig, thr, ch);
      Output o(bu_out, out);
      io::write_bursts(found, *o);
      // With a file output, score against the annotations of the channel's activity.
      const auto truth = rec.intervals(ch == Channel::Masseter ? AnnotationKind::Chew : AnnotationKind::Swallow);
      if (!bu_out.empty() && bu_out != "-" && !truth.empty()) {
        const auto ms = events::match_intervals(events::spans(found), truth, 0.5);
        out << "threshold=" << io::format_double(thr) << " detected=" << ms.detected << " truth=" << ms.truth
            << " matched=" << ms.matched << " precision=" << io::format_fixed(ms.precision(), 4)
            << " recall=" << io::format_fixed(ms.recall(), 4) << '\n';
      }
    } else if (*feat) {
      std::vector<RawRecording> recs;
      for (const auto& path : feat_in) recs.push_back(io::read_recording(path));
      features::MatrixOptions mo;
      mo.threshold_j = feat_j;
      const auto m = pipeline::cohort_dataset(recs, parse_task(feat_task), feat_filter.config(), mo);
      Output o(feat_out, out);
      io::write_dataset(m, *o);
    } else if (*train) {
      features::FeatureMatrix m;
      for (const auto& path : train_in) m.append(io::read_dataset(path));
      tc.seed = seed;
      if (!train_grid.empty()) {
        const auto grid = parse_list(train_grid);
        const auto g = learn::grid_search_cv(m, grid, tc, train_folds, seed);
        for (const auto& p : g.scores) out << "C=" << io::format_double(p.C) << " f1=" << io::format_fixed(p.mean_f1, 4) << '\n';
        tc = g.best;
      }
      const auto model = learn::train_linear_svm(m, tc);
      io::save_model(model, train_out);
      out << "trained on " << m.rows() << " rows, C=" << io::format_double(tc.C) << ", "
          << model.report.epochs << " epochs" << (model.report.converged ? "" : " (not converged)") << '\n';
    } else if (*eval) {
      features::FeatureMatrix m;
      for (const auto& path : eval_in) m.append(io::read_dataset(path));
      etc.seed = seed;
      const auto report = learn::lopo_evaluate(m, etc, seed);
      Output o(eval_out, out);
      io::write_eval_report(report, *o);
    } else if (*trt) {
      std::vector<RawRecording> recs;
      for (const auto& path : trt_in) recs.push_back(io::read_recording(path));
      rtc.seed = seed;
      const auto model = pipeline::train_rt_model(recs, realtime::RtConfig{}, rtc, trt_stride);
      io::save_model(model, trt_out);
      out << "trained streaming model, " << model.report.epochs << " epochs\n";
    } else if (*stream) {
      const auto rec = io::read_recording(st_in);
      const auto model = std::make_shared<const learn::LinearModel>(io::load_model(st_model));
      realtime::RtConfig cfg;
      cfg.preprocess.filter.sample_rate = rec.sample_rate;
      const auto profile = realtime::calibrate_from_recording(rec, cfg);
      const auto run = realtime::run_stream(rec, model, profile, cfg);
      Output o(st_out, out);
      io::write_event_log(run.events, *o);
      if (!st_rates.empty()) {
        Output r(st_rates, out);
        *r << "t,rate\n";
        for (const auto& s : run.rates) *r << io::format_fixed(s.t, 3) << ',' << io::format_fixed(s.rate, 6) << '\n';
      }
    } else if (*analyze) {
      const auto events = read_events_file(an_in);
      const auto timeline = metrics::correct_and_segment(events, an_gap);
      Output o(an_out, out);
      io::write_metrics_report(metrics::session_metrics(timeline), *o);
    } else if (*serve) {
      if (sv_port < 0 || sv_port > 65535) throw ParameterError("port out of range");
      block_shutdown_signals();
      const auto model = std::make_shared<const learn::LinearModel>(io::load_model(sv_model));
      protocol::ServerOptions so;
      so.port = static_cast<std::uint16_t>(sv_port);
      so.log_dir = sv_logs;
      so.max_backlog = sv_backlog;
      protocol::Server server(model, so);
      const auto port = server.listen();
      out << "listening on 127.0.0.1:" << port << std::endl;
      server.start();
      wait_for_shutdown([&] { return sv_max_sessions > 0 && server.sessions_served() >= sv_max_sessions; });
      server.stop();
    } else if (*replay) {
      if (rp_port < 0 || rp_port > 65535) throw ParameterError("port out of range");
      const auto rec = io::read_recording(rp_in);
      realtime::RtConfig cfg;
      cfg.preprocess.filter.sample_rate = rec.sample_rate;
      protocol::Hello hello;
      hello.session = rp_session.empty() ? rec.participant_id : rp_session;
      hello.sample_rate = rec.sample_rate;
      hello.profile = realtime::calibrate_from_recording(rec, cfg);
      hello.r_ref = rp_rref;
      protocol::ClientOptions co;
      co.host = rp_host;
      co.port = static_cast<std::uint16_t>(rp_port);
      co.speed = rp_speed;
      co.frame_samples = rp_frame;
      co.connect_retries = rp_retries;
      const auto lines = protocol::stream_client(rec, hello, co);
      Output o(rp_out, out);
      for (const auto& l : lines) *o << l << '\n';
      if (!lines.empty() && lines.back().starts_with("error,")) {
        err << "server: " << lines.back().substr(6) << '\n';
        return 1;
      }
    } else if (*fb) {
      std::ifstream in(fb_in);
      if (!in) throw Error("cannot open '" + fb_in + "'");
      const feedback::RateNormalizer norm{fb_rref};
      feedback::LevelTracker tracker(fb_dead);
      Output o(fb_out, out);
      for (const auto& s : read_rates(in)) {
        if (const auto level = tracker.update(feedback::normalize_rate(s.rate, norm))) {
          *o << "level," << io::format_fixed(s.t, 3) << ',' << feedback::to_string(*level) << '\n';
        }
      }
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace chewsense::cli
